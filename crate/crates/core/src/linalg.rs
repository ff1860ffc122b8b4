//! Small dense row-major matrices and the handful of factorizations the
//! MPC harness needs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::LinalgError;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row vectors. Returns `None` when the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds a matrix from row-major data. Returns `None` on a length mismatch.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), v);
        }
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn mul_transpose_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "matrix-vector shape mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "matrix sum shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    /// Extracts the submatrix selected by `rows` × `cols`.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                out[(i, j)] = self[(r, c)];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries((0..self.rows).map(|r| self.row(r)))
            .finish()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Compressed sparse row copy of a dense matrix, for repeated products.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_start: Vec<usize>,
    col_index: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &Matrix) -> Self {
        let mut row_start = Vec::with_capacity(m.rows + 1);
        let mut col_index = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for r in 0..m.rows {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    col_index.push(c);
                    values.push(v);
                }
            }
            row_start.push(values.len());
        }
        SparseMatrix {
            rows: m.rows,
            cols: m.cols,
            row_start,
            col_index,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let span = self.row_start[r]..self.row_start[r + 1];
            out[r] = self.col_index[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &w)| w * v[c])
                .sum();
        }
    }

    /// `out = selfᵀ v`.
    pub fn mul_transpose_vec_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for r in 0..self.rows {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            for k in self.row_start[r]..self.row_start[r + 1] {
                out[self.col_index[k]] += self.values[k] * vr;
            }
        }
    }
}

/// Symmetric ordering that keeps nonzeros near the diagonal (reverse
/// Cuthill-McKee on the pattern of `m`). `order[new] = old`.
pub fn envelope_order(m: &Matrix) -> Vec<usize> {
    let n = m.rows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (m[(i, j)] != 0.0 || m[(j, i)] != 0.0))
                .collect()
        })
        .collect();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let root = (0..n)
            .filter(|&i| !seen[i])
            .min_by_key(|&i| (adj[i].len(), i))
            .expect("unvisited vertex");
        seen[root] = true;
        let mut head = order.len();
        order.push(root);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                seen[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P M Pᵀ = L Lᵀ` in envelope storage. Row `i` of `L` is kept
/// from its first nonzero column, which the ordering keeps close to `i`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    order: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &Matrix) -> Result<Self, LinalgError> {
        let n = m.rows();
        if m.cols() != n {
            return Err(LinalgError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let order = envelope_order(m);
        let at = |i: usize, j: usize| m[(order[i], order[j])];
        let first: Vec<usize> = (0..n)
            .map(|i| (0..i).find(|&j| at(i, j) != 0.0).unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i + 1 - first[i]);
        }
        let mut l = vec![0.0; start[n]];
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let lo = fi.max(fj);
                let mut s = at(i, j);
                for k in lo..j {
                    s -= l[si + k - fi] * l[sj + k - fj];
                }
                l[si + j - fi] = s / l[sj + j - fj];
            }
            let mut d = at(i, i);
            for k in fi..i {
                d -= l[si + k - fi] * l[si + k - fi];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: order[i] });
            }
            l[si + i - fi] = libm::sqrt(d);
        }
        Ok(Cholesky {
            order,
            first,
            start,
            l,
        })
    }

    pub fn dim(&self) -> usize {
        self.order.len()
    }

    /// Stored entries of `L`.
    pub fn nnz(&self) -> usize {
        self.l.len()
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.l[si + k - fi] * y[k];
            }
            y[i] = s / self.l[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            let xi = y[i] / self.l[si + i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.l[si + k - fi] * xi;
            }
        }
        for (i, &o) in self.order.iter().enumerate() {
            b[o] = y[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let m = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ])
        .unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = Cholesky::factor(&m).unwrap().solve(&b);
        let back = m.mul_vec(&x);
        for (p, q) in back.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            Cholesky::factor(&m),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn banded_factor_stays_in_envelope() {
        // tridiagonal with scrambled labels
        let n = 12;
        let label = |i: usize| (i * 5) % n;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(label(i), label(i))] = 4.0;
            if i + 1 < n {
                m[(label(i), label(i + 1))] = -1.0;
                m[(label(i + 1), label(i))] = -1.0;
            }
        }
        let f = Cholesky::factor(&m).unwrap();
        assert!(f.nnz() <= 2 * n);
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let back = m.mul_vec(&f.solve(&b));
        for (p, q) in back.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_product_matches_explicit() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let v = [0.5, -1.0];
        assert_eq!(m.mul_transpose_vec(&v), m.transpose().mul_vec(&v));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_none());
    }
    #[test]
    fn sparse_products_match_dense() {
        let m = Matrix::from_rows(&[
            vec![1.0, 0.0, 3.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, -2.0, 0.5],
        ])
        .unwrap();
        let s = SparseMatrix::from_dense(&m);
        assert_eq!(s.nnz(), 4);
        let v = [0.5, -1.0, 2.0];
        let mut out = [0.0; 3];
        s.mul_vec_into(&v, &mut out);
        assert_eq!(out.to_vec(), m.mul_vec(&v));
        s.mul_transpose_vec_into(&v, &mut out);
        assert_eq!(out.to_vec(), m.mul_transpose_vec(&v));
    }
}
