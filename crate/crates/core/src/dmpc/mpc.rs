//! Tracking scenario and centralized MPC on the condensed horizon QP.

use alloc::vec;
use alloc::vec::Vec;

use crate::dmpc::qp::{soften, QpSettings, QpSolver, SoftenedQp};
use crate::error::{QpError, SimError};
use crate::graph::LinearSystem;
use crate::linalg::Matrix;

/// Closed-loop tracking experiment. Every state tracks
/// `amplitude · sin(omega · k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub horizon: usize,
    pub steps: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Stage cost `q·|x − r|² + r·|u|²`.
    pub q_weight: f64,
    pub r_weight: f64,
    /// Consensus penalty.
    pub rho: f64,
    /// Consensus threshold on the primal and dual residuals.
    pub eps: f64,
    pub max_admm_iter: usize,
    /// Initial state; zero when absent.
    pub x0: Option<Vec<f64>>,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    /// Weight on state-bound slacks when a hard-constrained QP fails.
    pub soft_penalty: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            horizon: 30,
            steps: 60,
            amplitude: 1.0,
            omega: 2.0 * core::f64::consts::PI / 15.0,
            u_lo: -0.5,
            u_hi: 0.5,
            x_lo: -0.9,
            x_hi: 0.9,
            q_weight: 1.0,
            r_weight: 0.01,
            rho: 0.01,
            eps: 1e-3,
            max_admm_iter: 1000,
            x0: None,
            qp_tol: 1e-6,
            qp_max_iter: 20_000,
            soft_penalty: 1e4,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::Scenario("horizon must be at least 1"));
        }
        if !(self.u_lo <= self.u_hi) || !(self.x_lo <= self.x_hi) {
            return Err(SimError::Scenario("bounds are not ordered"));
        }
        if !(self.rho > 0.0) || !(self.eps > 0.0) || !(self.qp_tol > 0.0) {
            return Err(SimError::Scenario("rho, eps and qp_tol must be positive"));
        }
        if !(self.q_weight >= 0.0) || !(self.r_weight >= 0.0) {
            return Err(SimError::Scenario("cost weights must be non-negative"));
        }
        if self.max_admm_iter == 0 || self.qp_max_iter == 0 {
            return Err(SimError::Scenario("iteration limits must be positive"));
        }
        Ok(())
    }

    pub fn reference(&self, k: usize) -> f64 {
        self.amplitude * libm::sin(self.omega * k as f64)
    }

    pub(crate) fn qp_settings(&self) -> QpSettings {
        QpSettings {
            tol: self.qp_tol,
            max_iter: self.qp_max_iter,
            ..QpSettings::default()
        }
    }

    pub fn stage_cost(&self, x: &[f64], u: &[f64], k: usize) -> f64 {
        let r = self.reference(k);
        let xs: f64 = x.iter().map(|v| (v - r) * (v - r)).sum();
        let us: f64 = u.iter().map(|v| v * v).sum();
        self.q_weight * xs + self.r_weight * us
    }
}

/// Solver for a QP whose state rows may be softened on failure.
#[derive(Clone, Debug)]
pub(crate) struct FallbackQp {
    hard: QpSolver,
    soft: Option<(SoftenedQp, QpSolver)>,
    state_rows: Vec<usize>,
    penalty: f64,
    settings: QpSettings,
}

impl FallbackQp {
    pub(crate) fn new(
        p: Matrix,
        c: Matrix,
        state_rows: Vec<usize>,
        penalty: f64,
        settings: QpSettings,
    ) -> Result<Self, QpError> {
        Ok(FallbackQp {
            hard: QpSolver::new(p, c, settings)?,
            soft: None,
            state_rows,
            penalty,
            settings,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.hard.dim()
    }

    /// Returns the primal solution, the solver iterations and whether the
    /// soft problem was used.
    pub(crate) fn solve(
        &mut self,
        q: &[f64],
        l: &[f64],
        u: &[f64],
    ) -> Result<(Vec<f64>, usize, bool), QpError> {
        match self.hard.solve(q, l, u) {
            Ok(s) => Ok((s.x, s.iterations, false)),
            Err(QpError::NotConverged { .. }) if !self.state_rows.is_empty() => {
                self.hard.reset_warm_start();
                if self.soft.is_none() {
                    let sq = soften(self.hard.p(), self.hard.c(), &self.state_rows, self.penalty);
                    let solver = QpSolver::new(sq.p.clone(), sq.c.clone(), self.settings)?;
                    self.soft = Some((sq, solver));
                }
                let (sq, solver) = self.soft.as_mut().expect("built above");
                let (l2, u2) = sq.bounds(l, u);
                let mut s = solver.solve(&sq.linear(q), &l2, &u2)?;
                s.x.truncate(sq.original_dim());
                Ok((s.x, self.settings.max_iter + s.iterations, true))
            }
            Err(e) => Err(e),
        }
    }
}

/// Centralized MPC over the condensed input sequence `U = (u(0), …, u(H−1))`.
///
/// Predicted states are `X = Φx + ΓU`; the QP carries input bounds and the
/// state bounds as rows `ΓU ∈ [x_lo − Φx, x_hi − Φx]`.
#[derive(Clone, Debug)]
pub struct CentralizedMpc {
    n: usize,
    p: usize,
    horizon: usize,
    phi: Matrix,
    gamma: Matrix,
    scenario: Scenario,
    qp: FallbackQp,
    soft_steps: usize,
    qp_iterations: usize,
}

impl CentralizedMpc {
    pub fn new(sys: &LinearSystem, scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let (n, p, h) = (sys.state_dim(), sys.input_dim(), scenario.horizon);
        let mut phi = Matrix::zeros(n * h, n);
        let mut powers = Vec::with_capacity(h);
        let mut ak = Matrix::identity(n);
        for t in 0..h {
            // powers[t] = A^t
            powers.push(ak.clone());
            ak = sys.a().mul(&ak);
            phi.set_block(t * n, 0, &ak);
        }
        let mut gamma = Matrix::zeros(n * h, p * h);
        for t in 1..=h {
            for s in 0..t {
                let blk = powers[t - 1 - s].mul(sys.b());
                gamma.set_block((t - 1) * n, s * p, &blk);
            }
        }
        let mut hess = gamma.transpose().mul(&gamma);
        hess.scale(2.0 * scenario.q_weight);
        for i in 0..p * h {
            hess[(i, i)] += 2.0 * scenario.r_weight;
        }
        let mut c = Matrix::zeros(p * h + n * h, p * h);
        c.set_block(0, 0, &Matrix::identity(p * h));
        c.set_block(p * h, 0, &gamma);
        let state_rows = (p * h..p * h + n * h).collect();
        let qp = FallbackQp::new(
            hess,
            c,
            state_rows,
            scenario.soft_penalty,
            scenario.qp_settings(),
        )?;
        Ok(CentralizedMpc {
            n,
            p,
            horizon: h,
            phi,
            gamma,
            scenario: scenario.clone(),
            qp,
            soft_steps: 0,
            qp_iterations: 0,
        })
    }

    /// Inner solver iterations over all plans so far.
    pub fn qp_iterations(&self) -> usize {
        self.qp_iterations
    }

    /// Number of steps that needed softened state bounds.
    pub fn soft_steps(&self) -> usize {
        self.soft_steps
    }

    /// Optimal input sequence at state `x` for the references of steps
    /// `k+1 … k+H`.
    pub fn plan(&mut self, x: &[f64], k: usize) -> Result<Vec<f64>, SimError> {
        let (n, p, h) = (self.n, self.p, self.horizon);
        let s = &self.scenario;
        let free = self.phi.mul_vec(x);
        let err: Vec<f64> = (0..n * h)
            .map(|i| free[i] - s.reference(k + 1 + i / n))
            .collect();
        let mut q = self.gamma.mul_transpose_vec(&err);
        for v in &mut q {
            *v *= 2.0 * s.q_weight;
        }
        let mut l = vec![s.u_lo; p * h];
        let mut u = vec![s.u_hi; p * h];
        l.extend(free.iter().map(|f| s.x_lo - f));
        u.extend(free.iter().map(|f| s.x_hi - f));
        let (sol, iters, soft) = self.qp.solve(&q, &l, &u)?;
        self.qp_iterations += iters;
        if soft {
            self.soft_steps += 1;
        }
        Ok(sol)
    }

    /// First input of the plan.
    pub fn step(&mut self, x: &[f64], k: usize) -> Result<Vec<f64>, SimError> {
        let mut plan = self.plan(x, k)?;
        plan.truncate(self.p);
        Ok(plan)
    }

    pub fn decision_dim(&self) -> usize {
        self.qp.dim()
    }
}
