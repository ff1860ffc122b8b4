//! Operator-splitting solver for convex quadratic programs
//!
//! ```text
//! minimize ½ xᵀPx + qᵀx   subject to   l ≤ Cx ≤ u
//! ```
//!
//! The iteration is the ADMM splitting with relaxation used by OSQP. The
//! matrix `P + σI + ρCᵀC` is factored once and kept until `ρ` is rescaled, so
//! repeated solves with new `q`, `l`, `u` reuse it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::QpError;
use crate::linalg::{norm_inf, Cholesky, Matrix, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    /// Bound on both the primal and the dual residual (∞-norm).
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub relaxation: f64,
    /// Iterations between step-size updates; 0 disables them.
    pub adapt_every: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            relaxation: 1.6,
            adapt_every: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// `Cx` projected onto the bounds.
    pub z: Vec<f64>,
    /// Constraint multipliers.
    pub y: Vec<f64>,
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
}

/// A QP with fixed `P` and `C`; `q`, `l`, `u` are supplied per solve.
#[derive(Clone, Debug)]
pub struct QpSolver {
    p: Matrix,
    c: Matrix,
    p_sparse: SparseMatrix,
    c_sparse: SparseMatrix,
    settings: QpSettings,
    rho: f64,
    factor: Option<Cholesky>,
    warm: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

/// Rows with equal bounds get a larger step, as in OSQP.
const EQUALITY_RHO_SCALE: f64 = 1e3;
const INF: f64 = 1e20;

impl QpSolver {
    pub fn new(p: Matrix, c: Matrix, settings: QpSettings) -> Result<Self, QpError> {
        let n = p.rows();
        if p.cols() != n {
            return Err(QpError::Shape {
                rows: p.rows(),
                cols: p.cols(),
                n,
            });
        }
        if c.cols() != n {
            return Err(QpError::Shape {
                rows: c.rows(),
                cols: c.cols(),
                n,
            });
        }
        Ok(QpSolver {
            p_sparse: SparseMatrix::from_dense(&p),
            c_sparse: SparseMatrix::from_dense(&c),
            p,
            c,
            rho: settings.rho,
            settings,
            factor: None,
            warm: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn constraint_count(&self) -> usize {
        self.c.rows()
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Forgets the previous solution.
    pub fn reset_warm_start(&mut self) {
        self.warm = None;
    }

    /// Seeds the next solve with a primal point and multipliers.
    pub fn warm_start(&mut self, x: Vec<f64>, y: Vec<f64>) {
        let z = self.c.mul_vec(&x);
        self.warm = Some((x, z, y));
    }

    fn row_rho(&self, l: &[f64], u: &[f64]) -> Vec<f64> {
        l.iter()
            .zip(u)
            .map(|(&lo, &hi)| {
                if (hi - lo).abs() < 1e-12 {
                    self.rho * EQUALITY_RHO_SCALE
                } else {
                    self.rho
                }
            })
            .collect()
    }

    fn refactor(&mut self, rho_rows: &[f64]) -> Result<(), QpError> {
        let n = self.dim();
        let mut k = self.p.clone();
        for i in 0..n {
            k[(i, i)] += self.settings.sigma;
        }
        for (r, &rho) in rho_rows.iter().enumerate() {
            let row = self.c.row(r);
            let support: Vec<usize> = (0..n).filter(|&i| row[i] != 0.0).collect();
            for &i in &support {
                for &j in &support {
                    k[(i, j)] += rho * row[i] * row[j];
                }
            }
        }
        self.factor = Some(Cholesky::factor(&k)?);
        Ok(())
    }

    pub fn solve(&mut self, q: &[f64], l: &[f64], u: &[f64]) -> Result<QpSolution, QpError> {
        let n = self.dim();
        let m = self.constraint_count();
        if q.len() != n || l.len() != m || u.len() != m {
            return Err(QpError::Shape {
                rows: l.len(),
                cols: q.len(),
                n,
            });
        }
        if let Some(i) = (0..m).find(|&i| l[i] > u[i]) {
            return Err(QpError::Bounds(i));
        }
        let l: Vec<f64> = l.iter().map(|&v| v.max(-INF)).collect();
        let u: Vec<f64> = u.iter().map(|&v| v.min(INF)).collect();
        let mut rho_rows = self.row_rho(&l, &u);
        if self.factor.is_none() {
            self.refactor(&rho_rows)?;
        }
        let (mut x, mut z, mut y) = match self.warm.take() {
            Some(w) if w.0.len() == n && w.1.len() == m => w,
            _ => (vec![0.0; n], vec![0.0; m], vec![0.0; m]),
        };
        let s = self.settings;
        let a = s.relaxation;
        let mut rhs = vec![0.0; n];
        let mut z_tilde = vec![0.0; m];
        let mut px = vec![0.0; n];
        let mut cx = vec![0.0; m];
        let mut w = vec![0.0; m];
        let mut ctw = vec![0.0; n];
        let mut cty = vec![0.0; n];
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        for it in 1..=s.max_iter {
            for r in 0..m {
                w[r] = rho_rows[r] * z[r] - y[r];
            }
            self.c_sparse.mul_transpose_vec_into(&w, &mut ctw);
            for i in 0..n {
                rhs[i] = s.sigma * x[i] - q[i] + ctw[i];
            }
            let factor = self.factor.as_ref().expect("factored");
            factor.solve_in_place(&mut rhs);
            let x_tilde = &rhs;
            self.c_sparse.mul_vec_into(x_tilde, &mut z_tilde);
            for i in 0..n {
                x[i] = a * x_tilde[i] + (1.0 - a) * x[i];
            }
            for r in 0..m {
                let relaxed = a * z_tilde[r] + (1.0 - a) * z[r];
                let z_new = (relaxed + y[r] / rho_rows[r]).clamp(l[r], u[r]);
                y[r] += rho_rows[r] * (relaxed - z_new);
                z[r] = z_new;
            }
            let check = it % 5 == 0 || it == s.max_iter || it == 1;
            if !check {
                continue;
            }
            self.p_sparse.mul_vec_into(&x, &mut px);
            self.c_sparse.mul_vec_into(&x, &mut cx);
            self.c_sparse.mul_transpose_vec_into(&y, &mut cty);
            primal = (0..m).map(|r| (cx[r] - z[r]).abs()).fold(0.0, f64::max);
            dual = (0..n)
                .map(|i| (px[i] + q[i] + cty[i]).abs())
                .fold(0.0, f64::max);
            if primal <= s.tol && dual <= s.tol {
                self.warm = Some((x.clone(), z.clone(), y.clone()));
                return Ok(QpSolution {
                    x,
                    z,
                    y,
                    iterations: it,
                    primal,
                    dual,
                });
            }
            if s.adapt_every > 0 && it % s.adapt_every == 0 {
                let p_scale = norm_inf(&cx).max(norm_inf(&z)).max(1e-12);
                let d_scale = norm_inf(&px)
                    .max(norm_inf(&cty))
                    .max(norm_inf(q))
                    .max(1e-12);
                let ratio = libm::sqrt((primal / p_scale) / (dual / d_scale).max(1e-30));
                let new_rho = (self.rho * ratio).clamp(1e-6, 1e6);
                if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                    let scale = new_rho / self.rho;
                    self.rho = new_rho;
                    for r in rho_rows.iter_mut() {
                        *r *= scale;
                    }
                    self.refactor(&rho_rows)?;
                }
            }
        }
        self.warm = Some((x, z, y));
        Err(QpError::NotConverged {
            iterations: s.max_iter,
            primal,
            dual,
        })
    }
}

/// Box-constrained QP `min ½xᵀHx + fᵀx, lo ≤ x ≤ hi`. Returns the projected
/// iterate, which satisfies the bounds exactly.
pub fn qp_solve(
    h: &Matrix,
    f: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    let n = h.rows();
    let settings = QpSettings {
        tol,
        max_iter,
        ..QpSettings::default()
    };
    let mut solver = QpSolver::new(h.clone(), Matrix::identity(n), settings)?;
    let mut sol = solver.solve(f, lo, hi)?;
    sol.x.clone_from(&sol.z);
    Ok(sol)
}

/// Replaces the bounds of the listed rows by soft bounds: each row gets a
/// non-negative slack that may relax it, penalized by `½·penalty·s²`.
///
/// Returns the augmented `(P, C)` and a map producing the augmented `(l, u)`
/// from the original ones.
pub fn soften(p: &Matrix, c: &Matrix, rows: &[usize], penalty: f64) -> SoftenedQp {
    let n = p.rows();
    let k = rows.len();
    let m = c.rows();
    let mut p2 = Matrix::zeros(n + k, n + k);
    p2.set_block(0, 0, p);
    for s in 0..k {
        p2[(n + s, n + s)] = penalty;
    }
    // original rows (softened ones become upper rows), lower rows, slack >= 0
    let mut c2 = Matrix::zeros(m + 2 * k, n + k);
    for r in 0..m {
        for j in 0..n {
            c2[(r, j)] = c[(r, j)];
        }
    }
    for (s, &r) in rows.iter().enumerate() {
        c2[(r, n + s)] = -1.0;
        for j in 0..n {
            c2[(m + s, j)] = c[(r, j)];
        }
        c2[(m + s, n + s)] = 1.0;
        c2[(m + k + s, n + s)] = 1.0;
    }
    SoftenedQp {
        p: p2,
        c: c2,
        rows: rows.to_vec(),
        n,
        m,
    }
}

#[derive(Clone, Debug)]
pub struct SoftenedQp {
    pub p: Matrix,
    pub c: Matrix,
    rows: Vec<usize>,
    n: usize,
    m: usize,
}

impl SoftenedQp {
    pub fn bounds(&self, l: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.rows.len();
        let mut l2 = l.to_vec();
        let mut u2 = u.to_vec();
        for &r in &self.rows {
            l2[r] = f64::NEG_INFINITY;
        }
        for &r in &self.rows {
            l2.push(l[r]);
            u2.push(f64::INFINITY);
        }
        l2.extend(core::iter::repeat_n(0.0, k));
        u2.extend(core::iter::repeat_n(f64::INFINITY, k));
        debug_assert_eq!(l2.len(), self.m + 2 * k);
        (l2, u2)
    }

    pub fn linear(&self, q: &[f64]) -> Vec<f64> {
        let mut q2 = q.to_vec();
        q2.resize(self.n + self.rows.len(), 0.0);
        q2
    }

    pub fn original_dim(&self) -> usize {
        self.n
    }
}
