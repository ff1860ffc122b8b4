//! Closed-loop simulation and run metrics.

use alloc::vec::Vec;

use crate::clock::Clock;
use crate::dmpc::admm::DmpcController;
use crate::dmpc::mpc::{CentralizedMpc, Scenario};
use crate::error::SimError;
use crate::fsu::FsuCollection;
use crate::graph::LinearSystem;
use crate::metrics::Partition;

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub stage_cost: f64,
    pub cum_cost: f64,
    pub admm_iters: usize,
    /// Inner QP iterations over all solves of the step.
    pub qp_iters: usize,
    /// Parallel solve time of the step: the slowest core summed over
    /// iterations.
    pub max_core_time: f64,
    pub core_seconds_cum: f64,
    pub converged: bool,
    /// Slowest core per iteration.
    pub iteration_times: Vec<f64>,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub cores: usize,
    pub records: Vec<StepRecord>,
    /// `x(0) … x(T)`.
    pub states: Vec<Vec<f64>>,
    /// `u(0) … u(T−1)`.
    pub inputs: Vec<Vec<f64>>,
    pub soft_solves: usize,
}

impl RunMetrics {
    pub fn cumulative_cost(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_cost)
    }

    pub fn core_seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.core_seconds_cum)
    }

    /// Core-seconds recomputed from the per-iteration traces.
    pub fn recomputed_core_seconds(&self) -> f64 {
        let slowest: f64 = self
            .records
            .iter()
            .flat_map(|r| r.iteration_times.iter())
            .sum();
        slowest * self.cores as f64
    }

    pub fn mean_step_time(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.max_core_time).sum::<f64>() / self.records.len() as f64
    }

    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.admm_iters).sum()
    }

    pub fn unconverged_steps(&self) -> usize {
        self.records.iter().filter(|r| !r.converged).count()
    }

    /// Largest bound excess over all applied inputs and visited states.
    pub fn bound_violation(&self, sc: &Scenario) -> f64 {
        let ex = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
        let xs = self
            .states
            .iter()
            .flatten()
            .map(|&v| ex(v, sc.x_lo, sc.x_hi));
        let us = self
            .inputs
            .iter()
            .flatten()
            .map(|&v| ex(v, sc.u_lo, sc.u_hi));
        xs.chain(us).fold(0.0, f64::max)
    }
}

enum Controller {
    Central(CentralizedMpc),
    Distributed(DmpcController),
}

/// Runs `scenario.steps` closed-loop steps. Single-block partitions use
/// centralized MPC, everything else consensus ADMM with one core per block.
pub fn simulate<C: Clock>(
    sys: &LinearSystem,
    partition: &Partition,
    coll: &FsuCollection,
    scenario: &Scenario,
    clock: &C,
) -> Result<RunMetrics, SimError> {
    scenario.validate()?;
    let n = sys.state_dim();
    let mut x = match &scenario.x0 {
        Some(v) if v.len() != n => {
            return Err(SimError::Scenario("initial state has wrong length"))
        }
        Some(v) => v.clone(),
        None => alloc::vec![0.0; n],
    };
    let mut ctrl = if partition.block_count() == 1 {
        // still validates coverage and input ownership
        crate::dmpc::split::split_system(sys, partition, coll)?;
        Controller::Central(CentralizedMpc::new(sys, scenario)?)
    } else {
        Controller::Distributed(DmpcController::new(sys, partition, coll, scenario)?)
    };
    let cores = match &ctrl {
        Controller::Central(_) => 1,
        Controller::Distributed(d) => d.cores(),
    };
    let mut out = RunMetrics {
        cores,
        records: Vec::with_capacity(scenario.steps),
        states: alloc::vec![x.clone()],
        inputs: Vec::with_capacity(scenario.steps),
        soft_solves: 0,
    };
    let (mut cum, mut core_cum) = (0.0, 0.0);
    for k in 0..scenario.steps {
        let (mut u, iters, qp_iters, times, primal, dual, converged) = match &mut ctrl {
            Controller::Central(c) => {
                let (soft, inner) = (c.soft_steps(), c.qp_iterations());
                let t0 = clock.now();
                let u = c.step(&x, k)?;
                let dt = clock.now() - t0;
                out.soft_solves += c.soft_steps() - soft;
                let inner = c.qp_iterations() - inner;
                (u, 1, inner, alloc::vec![dt], Vec::new(), Vec::new(), true)
            }
            Controller::Distributed(d) => {
                let r = d.step(&x, k, clock)?;
                out.soft_solves += r.soft_solves;
                let inner = r.qp_iterations;
                (
                    r.u,
                    r.iterations,
                    inner,
                    r.core_times,
                    r.primal,
                    r.dual,
                    r.converged,
                )
            }
        };
        for v in &mut u {
            *v = v.clamp(scenario.u_lo, scenario.u_hi);
        }
        let stage = scenario.stage_cost(&x, &u, k);
        cum += stage;
        let step_time: f64 = times.iter().sum();
        core_cum += step_time * cores as f64;
        out.records.push(StepRecord {
            step: k,
            stage_cost: stage,
            cum_cost: cum,
            admm_iters: iters,
            qp_iters,
            max_core_time: step_time,
            core_seconds_cum: core_cum,
            converged,
            iteration_times: times,
            primal,
            dual,
        });
        x = sys.step(&x, &u);
        out.states.push(x.clone());
        out.inputs.push(u);
    }
    Ok(out)
}
