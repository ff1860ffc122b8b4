//! Distributed MPC: one horizon QP per CSU, coordinated by consensus ADMM on
//! the coupling states.
//!
//! CSU `i` optimizes its inputs `U`, its predicted states `X(1..H)` and local
//! copies `Z(1..H−1)` of the neighbour states it reads. Every shared trajectory
//! entry (an owned coupling state or a copy of one) is pulled towards a common
//! value `ẑ` by the augmented term `yᵀ(v − ẑ) + ρ/2 |v − ẑ|²`.

use alloc::vec;
use alloc::vec::Vec;

use crate::clock::Clock;
use crate::dmpc::mpc::{FallbackQp, Scenario};
use crate::dmpc::split::{split_system, CsuSystem};
use crate::error::SimError;
use crate::fsu::FsuCollection;
use crate::graph::LinearSystem;
use crate::linalg::Matrix;
use crate::metrics::Partition;

/// Outcome of one receding-horizon step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Global input applied at this step.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Primal residual after each iteration.
    pub primal: Vec<f64>,
    /// Dual residual after each iteration.
    pub dual: Vec<f64>,
    /// Slowest local solve of each iteration, in clock seconds.
    pub core_times: Vec<f64>,
    /// Local solves that needed softened state bounds.
    pub soft_solves: usize,
    /// Inner QP iterations summed over all local solves.
    pub qp_iterations: usize,
}

impl StepReport {
    /// Wall time of the step if every CSU ran on its own core.
    pub fn parallel_time(&self) -> f64 {
        self.core_times.iter().sum()
    }
}

#[derive(Clone, Debug)]
struct Local {
    csu: CsuSystem,
    /// Global indices of the copied neighbour states.
    ext: Vec<usize>,
    /// `[A⁽ⁱʲ⁾ …]` over `ext`.
    az: Matrix,
    qp: FallbackQp,
    /// `(variable, slot)` for each shared entry.
    shared: Vec<(usize, usize)>,
    /// Dual per shared entry.
    y: Vec<f64>,
}

impl Local {
    fn x_var(&self, h: usize, t: usize, r: usize) -> usize {
        h * self.csu.p() + (t - 1) * self.csu.n() + r
    }
}

#[derive(Clone, Debug)]
pub struct DmpcController {
    locals: Vec<Local>,
    scenario: Scenario,
    n: usize,
    p: usize,
    /// Consensus value per slot; slot `s·(H−1) + t − 1` holds shared state
    /// `s` at prediction step `t`.
    zhat: Vec<f64>,
    slots_per_state: usize,
}

impl DmpcController {
    pub fn new(
        sys: &LinearSystem,
        partition: &Partition,
        coll: &FsuCollection,
        scenario: &Scenario,
    ) -> Result<Self, SimError> {
        scenario.validate()?;
        let csus = split_system(sys, partition, coll)?;
        let h = scenario.horizon;
        let mut shared_state = vec![usize::MAX; sys.state_dim()];
        let mut n_shared = 0;
        for c in &csus {
            for cp in &c.couplings {
                for &s in &cp.states {
                    if shared_state[s] == usize::MAX {
                        shared_state[s] = n_shared;
                        n_shared += 1;
                    }
                }
            }
        }
        let slot = |s: usize, t: usize| shared_state[s] * (h - 1) + t - 1;
        let mut locals = Vec::with_capacity(csus.len());
        for csu in csus {
            let (n, p) = (csu.n(), csu.p());
            let ext: Vec<usize> = csu
                .couplings
                .iter()
                .flat_map(|c| c.states.iter().copied())
                .collect();
            let m = ext.len();
            let mut az = Matrix::zeros(n, m);
            let mut col = 0;
            for cp in &csu.couplings {
                az.set_block(0, col, &cp.block);
                col += cp.states.len();
            }
            let xo = h * p;
            let zo = xo + h * n;
            let dim = zo + (h - 1) * m;
            let mut shared = Vec::new();
            for t in 1..h {
                for (r, &s) in csu.states.iter().enumerate() {
                    if shared_state[s] != usize::MAX {
                        shared.push((xo + (t - 1) * n + r, slot(s, t)));
                    }
                }
                for (e, &s) in ext.iter().enumerate() {
                    shared.push((zo + (t - 1) * m + e, slot(s, t)));
                }
            }
            let mut hess = Matrix::zeros(dim, dim);
            for i in 0..xo {
                hess[(i, i)] = 2.0 * scenario.r_weight;
            }
            for i in xo..zo {
                hess[(i, i)] = 2.0 * scenario.q_weight;
            }
            for &(v, _) in &shared {
                hess[(v, v)] += scenario.rho;
            }
            // rows: dynamics, input box, state box
            let rows = h * n + h * p + h * n;
            let mut c = Matrix::zeros(rows, dim);
            for t in 0..h {
                for r in 0..n {
                    let row = t * n + r;
                    c[(row, xo + t * n + r)] = 1.0;
                    for k in 0..p {
                        c[(row, t * p + k)] = -csu.b[(r, k)];
                    }
                    if t >= 1 {
                        for cc in 0..n {
                            c[(row, xo + (t - 1) * n + cc)] -= csu.a[(r, cc)];
                        }
                        for e in 0..m {
                            c[(row, zo + (t - 1) * m + e)] = -az[(r, e)];
                        }
                    }
                }
            }
            for i in 0..h * p {
                c[(h * n + i, i)] = 1.0;
            }
            for i in 0..h * n {
                c[(h * n + h * p + i, xo + i)] = 1.0;
            }
            let state_rows = (h * n + h * p..rows).collect();
            let qp = FallbackQp::new(
                hess,
                c,
                state_rows,
                scenario.soft_penalty,
                scenario.qp_settings(),
            )?;
            let y = vec![0.0; shared.len()];
            locals.push(Local {
                csu,
                ext,
                az,
                qp,
                shared,
                y,
            });
        }
        Ok(DmpcController {
            locals,
            scenario: scenario.clone(),
            n: sys.state_dim(),
            p: sys.input_dim(),
            zhat: vec![0.0; n_shared * (h - 1)],
            slots_per_state: h - 1,
        })
    }

    /// Number of CSUs, one per core.
    pub fn cores(&self) -> usize {
        self.locals.len()
    }

    pub fn csus(&self) -> impl Iterator<Item = &CsuSystem> {
        self.locals.iter().map(|l| &l.csu)
    }

    /// Runs consensus ADMM at state `x` for the references of steps
    /// `k+1 … k+H` and returns the first input of the agreed plan.
    pub fn step<C: Clock>(
        &mut self,
        x: &[f64],
        k: usize,
        clock: &C,
    ) -> Result<StepReport, SimError> {
        let sc = &self.scenario;
        let h = sc.horizon;
        let rho = sc.rho;
        let n_slots = self.zhat.len();
        // problem data that stay fixed during the iterations
        let mut data = Vec::with_capacity(self.locals.len());
        for l in &self.locals {
            let (n, p) = (l.csu.n(), l.csu.p());
            let xi: Vec<f64> = l.csu.states.iter().map(|&s| x[s]).collect();
            let xe: Vec<f64> = l.ext.iter().map(|&s| x[s]).collect();
            let mut rhs = l.csu.a.mul_vec(&xi);
            for (r, v) in l.az.mul_vec(&xe).into_iter().enumerate() {
                rhs[r] += v;
            }
            let mut lo = vec![0.0; h * n];
            lo[..n].copy_from_slice(&rhs);
            let mut hi = lo.clone();
            lo.extend(core::iter::repeat_n(sc.u_lo, h * p));
            hi.extend(core::iter::repeat_n(sc.u_hi, h * p));
            lo.extend(core::iter::repeat_n(sc.x_lo, h * n));
            hi.extend(core::iter::repeat_n(sc.x_hi, h * n));
            let mut q = vec![0.0; l.qp.dim()];
            for t in 1..=h {
                let r = sc.reference(k + t);
                for i in 0..n {
                    q[l.x_var(h, t, i)] = -2.0 * sc.q_weight * r;
                }
            }
            data.push((q, lo, hi));
        }
        let mut report = StepReport {
            u: vec![0.0; self.p],
            iterations: 0,
            converged: false,
            primal: Vec::new(),
            dual: Vec::new(),
            core_times: Vec::new(),
            soft_solves: 0,
            qp_iterations: 0,
        };
        let mut sols: Vec<Vec<f64>> = vec![Vec::new(); self.locals.len()];
        let mut acc = vec![0.0; n_slots];
        let mut cnt = vec![0usize; n_slots];
        while report.iterations < sc.max_admm_iter {
            report.iterations += 1;
            let mut slowest = 0.0f64;
            for (i, l) in self.locals.iter_mut().enumerate() {
                let (base, lo, hi) = &data[i];
                let mut q = base.clone();
                for (e, &(v, s)) in l.shared.iter().enumerate() {
                    q[v] += l.y[e] - rho * self.zhat[s];
                }
                let t0 = clock.now();
                let (sol, inner, soft) = l.qp.solve(&q, lo, hi)?;
                report.qp_iterations += inner;
                let dt = clock.now() - t0;
                slowest = slowest.max(dt);
                report.soft_solves += soft as usize;
                sols[i] = sol;
            }
            report.core_times.push(slowest);
            acc.iter_mut().for_each(|a| *a = 0.0);
            cnt.iter_mut().for_each(|c| *c = 0);
            for (i, l) in self.locals.iter().enumerate() {
                for (e, &(v, s)) in l.shared.iter().enumerate() {
                    acc[s] += sols[i][v] + l.y[e] / rho;
                    cnt[s] += 1;
                }
            }
            let mut dual = 0.0f64;
            for s in 0..n_slots {
                let z = acc[s] / cnt[s] as f64;
                dual = dual.max((z - self.zhat[s]).abs());
                self.zhat[s] = z;
            }
            dual *= rho;
            let mut primal = 0.0f64;
            for (i, l) in self.locals.iter_mut().enumerate() {
                for (e, &(v, s)) in l.shared.iter().enumerate() {
                    let r = sols[i][v] - self.zhat[s];
                    primal = primal.max(r.abs());
                    l.y[e] += rho * r;
                }
            }
            report.primal.push(primal);
            report.dual.push(dual);
            if primal <= sc.eps {
                report.converged = true;
                break;
            }
        }
        for (i, l) in self.locals.iter().enumerate() {
            for (li, &gi) in l.csu.inputs.iter().enumerate() {
                report.u[gi] = sols[i][li];
            }
        }
        self.shift();
        Ok(report)
    }

    /// Moves consensus values and duals one prediction step forward.
    fn shift(&mut self) {
        let w = self.slots_per_state;
        if w < 2 {
            return;
        }
        for chunk in self.zhat.chunks_mut(w) {
            chunk.copy_within(1.., 0);
        }
        for l in &mut self.locals {
            // shared entries are laid out by t, so step t+1 sits one stride ahead
            let stride = l.shared.len() / w;
            if stride > 0 {
                l.y.copy_within(stride.., 0);
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::TickClock;
    use crate::dmpc::mpc::CentralizedMpc;
    use crate::fsu::select_fsus;
    use crate::graph::build_linear_graph;

    fn sys2() -> LinearSystem {
        LinearSystem::new(
            Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.5]]).unwrap(),
            Matrix::identity(2),
        )
        .unwrap()
    }

    fn sc(h: usize) -> Scenario {
        Scenario {
            horizon: h,
            eps: 1e-6,
            max_admm_iter: 5000,
            qp_tol: 1e-9,
            ..Scenario::default()
        }
    }

    #[test]
    fn decoupled_network_needs_one_iteration() {
        let sys = LinearSystem::new(Matrix::from_diagonal(&[0.5, 0.7, 0.2]), Matrix::identity(3))
            .unwrap();
        let coll = select_fsus(&build_linear_graph(&sys)).unwrap();
        let mut d = DmpcController::new(&sys, &Partition::singletons(3), &coll, &sc(8)).unwrap();
        let r = d.step(&[0.1, -0.2, 0.3], 0, &TickClock::new(1.0)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert_eq!(r.core_times, vec![1.0]);
    }

    #[test]
    fn agrees_with_centralized_plan() {
        let sys = sys2();
        let coll = select_fsus(&build_linear_graph(&sys)).unwrap();
        let s = sc(6);
        let mut d = DmpcController::new(&sys, &Partition::singletons(2), &coll, &s).unwrap();
        let mut c = CentralizedMpc::new(&sys, &s).unwrap();
        let x = [0.4, -0.3];
        let r = d.step(&x, 2, &TickClock::new(0.0)).unwrap();
        assert!(r.converged);
        let u = c.step(&x, 2).unwrap();
        for (a, b) in r.u.iter().zip(&u) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn warm_start_shortens_later_steps() {
        let sys = sys2();
        let coll = select_fsus(&build_linear_graph(&sys)).unwrap();
        let s = Scenario {
            horizon: 10,
            ..Scenario::default()
        };
        let mut d = DmpcController::new(&sys, &Partition::singletons(2), &coll, &s).unwrap();
        let clock = TickClock::new(0.0);
        let mut x = vec![0.0, 0.0];
        let mut iters = Vec::new();
        for k in 0..6 {
            let r = d.step(&x, k, &clock).unwrap();
            iters.push(r.iterations);
            x = sys.step(&x, &r.u);
        }
        assert!(iters[5] <= iters[0], "{iters:?}");
    }

    #[test]
    fn horizon_one_has_no_consensus() {
        let sys = sys2();
        let coll = select_fsus(&build_linear_graph(&sys)).unwrap();
        let mut d = DmpcController::new(&sys, &Partition::singletons(2), &coll, &sc(1)).unwrap();
        let r = d.step(&[0.2, 0.1], 0, &TickClock::new(0.0)).unwrap();
        assert_eq!(r.iterations, 1);
    }
}
