//! Equivalent graphs of discrete-time systems.
//!
//! Every input and every state variable of `x(k+1) = f(x(k), u(k)) + g` becomes
//! a vertex. A directed edge `i -> j` carries the weight `∂f_j/∂i`; edges never
//! end in an input vertex. Linear and piecewise-affine systems read the weights
//! straight from their matrices, general systems from a Jacobian evaluated at a
//! point.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{GraphError, JacobianError, ModelError};
use crate::linalg::Matrix;

/// Default magnitude below which Jacobian-derived weights are treated as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// A vertex of an equivalent graph. Inputs order before states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Input(usize),
    State(usize),
}

impl Vertex {
    pub fn is_input(self) -> bool {
        matches!(self, Vertex::Input(_))
    }

    pub fn is_state(self) -> bool {
        matches!(self, Vertex::State(_))
    }

    pub fn index(self) -> usize {
        match self {
            Vertex::Input(i) | Vertex::State(i) => i,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Input(i) => write!(f, "u{}", i + 1),
            Vertex::State(i) => write!(f, "x{}", i + 1),
        }
    }
}

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<(), ModelError> {
    if m.shape() != (rows, cols) {
        return Err(ModelError::Dimension {
            name: name.into(),
            rows: m.rows(),
            cols: m.cols(),
            expected_rows: rows,
            expected_cols: cols,
        });
    }
    for r in 0..rows {
        for c in 0..cols {
            if !m[(r, c)].is_finite() {
                return Err(ModelError::NonFinite {
                    name: name.into(),
                    row: r,
                    col: c,
                });
            }
        }
    }
    Ok(())
}

/// `x(k+1) = A x(k) + B u(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self, ModelError> {
        let n = a.rows();
        check_shape("A", &a, n, n)?;
        if b.rows() != n {
            return Err(ModelError::Dimension {
                name: "B".into(),
                rows: b.rows(),
                cols: b.cols(),
                expected_rows: n,
                expected_cols: b.cols(),
            });
        }
        check_shape("B", &b, n, b.cols())?;
        Ok(LinearSystem { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    /// One step of the dynamics.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut next = self.a.mul_vec(x);
        for (n, bu) in next.iter_mut().zip(self.b.mul_vec(u)) {
            *n += bu;
        }
        next
    }
}

/// Polyhedral region `{(x, u) : Hx x + Hu u <= h}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Guard {
    pub hx: Matrix,
    pub hu: Matrix,
    pub h: Vec<f64>,
}

impl Guard {
    /// The whole input-state space.
    pub fn everywhere(n: usize, p: usize) -> Self {
        Guard {
            hx: Matrix::zeros(0, n),
            hu: Matrix::zeros(0, p),
            h: Vec::new(),
        }
    }

    fn slack(&self, x: &[f64], u: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let hx = self.hx.mul_vec(x);
        let hu = self.hu.mul_vec(u);
        (0..self.h.len()).map(move |r| self.h[r] - hx[r] - hu[r])
    }

    /// Closed membership with tolerance `tol`.
    pub fn contains(&self, x: &[f64], u: &[f64], tol: f64) -> bool {
        self.slack(x, u).all(|s| s >= -tol)
    }

    /// Strict interior membership with margin `tol`.
    pub fn interior_contains(&self, x: &[f64], u: &[f64], tol: f64) -> bool {
        self.slack(x, u).all(|s| s > tol)
    }
}

/// One affine mode `x(k+1) = A^q x + B^q u + g^q` active on its guard.
#[derive(Clone, Debug, PartialEq)]
pub struct PwaMode {
    pub a: Matrix,
    pub b: Matrix,
    pub g: Vec<f64>,
    pub guard: Guard,
}

/// Piecewise-affine system made of one or more modes.
#[derive(Clone, Debug, PartialEq)]
pub struct PwaSystem {
    modes: Vec<PwaMode>,
}

impl PwaSystem {
    pub fn new(modes: Vec<PwaMode>) -> Result<Self, ModelError> {
        let first = modes.first().ok_or(ModelError::NoModes)?;
        let n = first.a.rows();
        let p = first.b.cols();
        for (q, mode) in modes.iter().enumerate() {
            check_shape(&format!("A[{q}]"), &mode.a, n, n)?;
            check_shape(&format!("B[{q}]"), &mode.b, n, p)?;
            if mode.g.len() != n {
                return Err(ModelError::VectorLength {
                    name: format!("g[{q}]"),
                    len: mode.g.len(),
                    expected: n,
                });
            }
            let m = mode.guard.h.len();
            check_shape(&format!("guard[{q}].Hx"), &mode.guard.hx, m, n)?;
            check_shape(&format!("guard[{q}].Hu"), &mode.guard.hu, m, p)?;
        }
        Ok(PwaSystem { modes })
    }

    pub fn modes(&self) -> &[PwaMode] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.modes[0].a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.modes[0].b.cols()
    }

    /// First mode whose (closed) guard contains the point.
    pub fn active_mode(&self, x: &[f64], u: &[f64]) -> Result<usize, ModelError> {
        self.modes
            .iter()
            .position(|m| m.guard.contains(x, u, 1e-12))
            .ok_or(ModelError::NoActiveMode)
    }

    /// Checks, at the given sample points only, that no two guards share
    /// interior points.
    pub fn check_disjoint_at(&self, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<(), ModelError> {
        for (x, u) in samples {
            let mut inside = self
                .modes
                .iter()
                .enumerate()
                .filter(|(_, m)| m.guard.interior_contains(x, u, 0.0))
                .map(|(q, _)| q);
            if let (Some(first), Some(second)) = (inside.next(), inside.next()) {
                return Err(ModelError::OverlappingModes { first, second });
            }
        }
        Ok(())
    }
}

/// A differentiable map `f` supplied through its Jacobian blocks.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `(∂f/∂x, ∂f/∂u)` at `(x, u)`, shaped `n×n` and `n×p`.
    fn jacobian(&self, x: &[f64], u: &[f64]) -> Result<(Matrix, Matrix), JacobianError>;
    /// The constant term `g`.
    fn offset(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }
}

impl Dynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.rows()
    }

    fn input_dim(&self) -> usize {
        self.b.cols()
    }

    fn jacobian(&self, _x: &[f64], _u: &[f64]) -> Result<(Matrix, Matrix), JacobianError> {
        Ok((self.a.clone(), self.b.clone()))
    }
}

/// Central-difference Jacobian of a plain function `f(x, u) -> x⁺`.
pub struct FiniteDifference<F> {
    f: F,
    n: usize,
    p: usize,
    step: f64,
    offset: Vec<f64>,
}

impl<F> FiniteDifference<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    pub fn new(n: usize, p: usize, f: F) -> Self {
        FiniteDifference {
            f,
            n,
            p,
            step: 1e-6,
            offset: vec![0.0; n],
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_offset(mut self, g: Vec<f64>) -> Self {
        self.offset = g;
        self
    }

    fn column(&self, x: &[f64], u: &[f64], var: Vertex) -> Vec<f64> {
        let mut xp = x.to_vec();
        let mut up = u.to_vec();
        let mut xm = x.to_vec();
        let mut um = u.to_vec();
        match var {
            Vertex::State(i) => {
                xp[i] += self.step;
                xm[i] -= self.step;
            }
            Vertex::Input(i) => {
                up[i] += self.step;
                um[i] -= self.step;
            }
        }
        let fp = (self.f)(&xp, &up);
        let fm = (self.f)(&xm, &um);
        fp.iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * self.step))
            .collect()
    }
}

impl<F> Dynamics for FiniteDifference<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.p
    }

    fn jacobian(&self, x: &[f64], u: &[f64]) -> Result<(Matrix, Matrix), JacobianError> {
        let mut dx = Matrix::zeros(self.n, self.n);
        let mut du = Matrix::zeros(self.n, self.p);
        for i in 0..self.n {
            let col = self.column(x, u, Vertex::State(i));
            if col.len() != self.n {
                return Err(JacobianError::Shape { block: "df/dx" });
            }
            for (j, v) in col.into_iter().enumerate() {
                dx[(j, i)] = v;
            }
        }
        for i in 0..self.p {
            let col = self.column(x, u, Vertex::Input(i));
            if col.len() != self.n {
                return Err(JacobianError::Shape { block: "df/du" });
            }
            for (j, v) in col.into_iter().enumerate() {
                du[(j, i)] = v;
            }
        }
        Ok((dx, du))
    }

    fn offset(&self) -> Vec<f64> {
        self.offset.clone()
    }
}

/// The three supported system descriptions.
pub enum SystemModel {
    Linear(LinearSystem),
    Pwa(PwaSystem),
    Differentiable(Box<dyn Dynamics + Send + Sync>),
}

impl SystemModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SystemModel::Linear(_) => "linear",
            SystemModel::Pwa(_) => "pwa",
            SystemModel::Differentiable(_) => "differentiable",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemModel::Linear(s) => s.state_dim(),
            SystemModel::Pwa(s) => s.state_dim(),
            SystemModel::Differentiable(d) => d.state_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SystemModel::Linear(s) => s.input_dim(),
            SystemModel::Pwa(s) => s.input_dim(),
            SystemModel::Differentiable(d) => d.input_dim(),
        }
    }

    pub fn as_linear(&self) -> Result<&LinearSystem, ModelError> {
        match self {
            SystemModel::Linear(s) => Ok(s),
            other => Err(ModelError::WrongKind {
                expected: "linear",
                found: other.kind(),
            }),
        }
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemModel::Linear(s) => f.debug_tuple("Linear").field(s).finish(),
            SystemModel::Pwa(s) => f.debug_tuple("Pwa").field(s).finish(),
            SystemModel::Differentiable(d) => f
                .debug_struct("Differentiable")
                .field("n", &d.state_dim())
                .field("p", &d.input_dim())
                .finish(),
        }
    }
}

/// A weighted directed edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub source: Vertex,
    pub target: Vertex,
    pub weight: f64,
}

/// Weighted directed graph with one vertex per input and state variable.
///
/// Edges are kept sorted by `(source, target)` and only nonzero weights are
/// stored.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentGraph {
    n_inputs: usize,
    n_states: usize,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    labels: Vec<f64>,
    evaluated_at: Option<(Vec<f64>, Vec<f64>)>,
}

impl EquivalentGraph {
    /// Assembles a graph from explicit edges. `labels` holds `g_i` per state.
    pub fn from_edges(
        n_inputs: usize,
        n_states: usize,
        edges: impl IntoIterator<Item = Edge>,
        labels: Vec<f64>,
    ) -> Result<Self, GraphError> {
        if labels.len() != n_states {
            return Err(GraphError::Labels {
                len: labels.len(),
                expected: n_states,
            });
        }
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            for v in [e.source, e.target] {
                let bound = if v.is_input() { n_inputs } else { n_states };
                if v.index() >= bound {
                    return Err(GraphError::UnknownVertex(v));
                }
            }
            if e.target.is_input() {
                return Err(GraphError::EdgeIntoInput {
                    from: e.source,
                    to: e.target,
                });
            }
            if e.weight == 0.0 || !e.weight.is_finite() {
                return Err(GraphError::BadWeight {
                    from: e.source,
                    to: e.target,
                });
            }
        }
        edges.sort_by_key(|a| (a.source, a.target));
        if let Some(w) = edges
            .windows(2)
            .find(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target))
        {
            return Err(GraphError::DuplicateEdge {
                from: w[0].source,
                to: w[0].target,
            });
        }
        let total = n_inputs + n_states;
        let mut out_adj = vec![Vec::new(); total];
        let mut in_adj = vec![Vec::new(); total];
        let flat = |v: Vertex| match v {
            Vertex::Input(i) => i,
            Vertex::State(j) => n_inputs + j,
        };
        for (k, e) in edges.iter().enumerate() {
            out_adj[flat(e.source)].push(k);
            in_adj[flat(e.target)].push(k);
        }
        Ok(EquivalentGraph {
            n_inputs,
            n_states,
            edges,
            out_adj,
            in_adj,
            labels,
            evaluated_at: None,
        })
    }

    fn from_jacobian(
        dfdx: &Matrix,
        dfdu: &Matrix,
        labels: Vec<f64>,
        keep: impl Fn(f64) -> bool,
    ) -> Self {
        let n = dfdx.rows();
        let p = dfdu.cols();
        let mut edges = Vec::new();
        for i in 0..p {
            for j in 0..n {
                let w = dfdu[(j, i)];
                if keep(w) {
                    edges.push(Edge {
                        source: Vertex::Input(i),
                        target: Vertex::State(j),
                        weight: w,
                    });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let w = dfdx[(j, i)];
                if keep(w) {
                    edges.push(Edge {
                        source: Vertex::State(i),
                        target: Vertex::State(j),
                        weight: w,
                    });
                }
            }
        }
        EquivalentGraph::from_edges(p, n, edges, labels)
            .expect("jacobian-derived edges are well formed")
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn vertex_count(&self) -> usize {
        self.n_inputs + self.n_states
    }

    /// Inputs first, then states.
    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        (0..self.n_inputs)
            .map(Vertex::Input)
            .chain((0..self.n_states).map(Vertex::State))
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match v {
            Vertex::Input(i) => i < self.n_inputs,
            Vertex::State(j) => j < self.n_states,
        }
    }

    pub(crate) fn flat(&self, v: Vertex) -> usize {
        match v {
            Vertex::Input(i) => i,
            Vertex::State(j) => self.n_inputs + j,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Input-to-state edges.
    pub fn input_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.source.is_input())
    }

    /// State-to-state edges.
    pub fn state_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.source.is_state())
    }

    /// Weight of `source -> target`, zero when there is no edge.
    pub fn weight(&self, source: Vertex, target: Vertex) -> f64 {
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&(source, target)))
            .map_or(0.0, |k| self.edges[k].weight)
    }

    pub fn out_edges(&self, v: Vertex) -> impl Iterator<Item = &Edge> {
        self.out_adj[self.flat(v)].iter().map(|&k| &self.edges[k])
    }

    pub fn in_edges(&self, v: Vertex) -> impl Iterator<Item = &Edge> {
        self.in_adj[self.flat(v)].iter().map(|&k| &self.edges[k])
    }

    /// Vertices sharing an edge with `v` in either direction, `v` excluded.
    pub fn neighborhood(&self, v: Vertex) -> BTreeSet<Vertex> {
        self.out_edges(v)
            .map(|e| e.target)
            .chain(self.in_edges(v).map(|e| e.source))
            .filter(|&w| w != v)
            .collect()
    }

    /// Label `g̃`: `g_i` on states, zero on inputs.
    pub fn label(&self, v: Vertex) -> f64 {
        match v {
            Vertex::Input(_) => 0.0,
            Vertex::State(j) => self.labels[j],
        }
    }

    pub fn state_labels(&self) -> &[f64] {
        &self.labels
    }

    /// The `(x, u)` point a Jacobian-derived graph was evaluated at.
    pub fn evaluated_at(&self) -> Option<(&[f64], &[f64])> {
        self.evaluated_at
            .as_ref()
            .map(|(x, u)| (x.as_slice(), u.as_slice()))
    }

    /// Sum of absolute edge weights.
    pub fn total_mass(&self) -> f64 {
        self.edges.iter().map(|e| e.weight.abs()).sum()
    }

    pub fn signature(&self) -> TopologySignature {
        TopologySignature::of(self)
    }
}

/// Graph of a linear system: `u_i -> x_j` iff `B[j][i] != 0`, `x_i -> x_j` iff
/// `A[j][i] != 0`. No labels.
pub fn build_linear_graph(sys: &LinearSystem) -> EquivalentGraph {
    EquivalentGraph::from_jacobian(&sys.a, &sys.b, vec![0.0; sys.state_dim()], |w| w != 0.0)
}

/// Graph of mode `q` (zero-based) of a piecewise-affine system, labelled with `g^q`.
pub fn build_pwa_graph(sys: &PwaSystem, q: usize) -> Result<EquivalentGraph, ModelError> {
    let mode = sys.modes.get(q).ok_or(ModelError::ModeOutOfRange {
        mode: q,
        count: sys.modes.len(),
    })?;
    Ok(EquivalentGraph::from_jacobian(
        &mode.a,
        &mode.b,
        mode.g.clone(),
        |w| w != 0.0,
    ))
}

/// Graph of a differentiable system at `(x, u)`; weights with magnitude at or
/// below `zero_tol` are dropped.
pub fn build_differentiable_graph(
    dynamics: &dyn Dynamics,
    x: &[f64],
    u: &[f64],
    zero_tol: f64,
) -> Result<EquivalentGraph, JacobianError> {
    let n = dynamics.state_dim();
    let p = dynamics.input_dim();
    if x.len() != n || u.len() != p {
        return Err(JacobianError::Point {
            x_len: x.len(),
            u_len: u.len(),
        });
    }
    let (dfdx, dfdu) = dynamics.jacobian(x, u)?;
    if dfdx.shape() != (n, n) {
        return Err(JacobianError::Shape { block: "df/dx" });
    }
    if dfdu.shape() != (n, p) {
        return Err(JacobianError::Shape { block: "df/du" });
    }
    for row in 0..n {
        for i in 0..n {
            if !dfdx[(row, i)].is_finite() {
                return Err(JacobianError::NonFinite {
                    row,
                    column: Vertex::State(i),
                });
            }
        }
        for i in 0..p {
            if !dfdu[(row, i)].is_finite() {
                return Err(JacobianError::NonFinite {
                    row,
                    column: Vertex::Input(i),
                });
            }
        }
    }
    let mut g =
        EquivalentGraph::from_jacobian(&dfdx, &dfdu, dynamics.offset(), |w| w.abs() > zero_tol);
    g.evaluated_at = Some((x.to_vec(), u.to_vec()));
    Ok(g)
}

/// Edge support of a graph as a bitset over (source vertex) × (target state).
///
/// Targets range over states only since no edge ends in an input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopologySignature {
    n_inputs: usize,
    n_states: usize,
    bits: Vec<u64>,
}

impl TopologySignature {
    pub fn of(g: &EquivalentGraph) -> Self {
        let len = (g.n_inputs + g.n_states) * g.n_states;
        let mut bits = vec![0u64; len.div_ceil(64)];
        for e in &g.edges {
            let k = g.flat(e.source) * g.n_states + e.target.index();
            bits[k / 64] |= 1 << (k % 64);
        }
        TopologySignature {
            n_inputs: g.n_inputs,
            n_states: g.n_states,
            bits,
        }
    }

    pub fn has_edge(&self, source: Vertex, target: Vertex) -> bool {
        let Vertex::State(t) = target else {
            return false;
        };
        let s = match source {
            Vertex::Input(i) => i,
            Vertex::State(j) => self.n_inputs + j,
        };
        let k = s * self.n_states + t;
        self.bits[k / 64] & (1 << (k % 64)) != 0
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }
}

/// Upper bound on the number of distinct topologies of a system with `n`
/// states and `p` inputs: `2^(n(n+p))`, or `2^(n(n+p-1))` when self-edges are
/// ignored. `None` if the bound does not fit in a `u128`.
pub fn topology_bound(n: usize, p: usize, self_edges: bool) -> Option<u128> {
    let slots = if self_edges {
        n * (n + p)
    } else {
        n * (n + p).saturating_sub(1)
    };
    u32::try_from(slots).ok().and_then(|s| 1u128.checked_shl(s))
}

/// Distinct topologies over all modes of a piecewise-affine system.
pub fn pwa_topologies(sys: &PwaSystem) -> BTreeSet<TopologySignature> {
    (0..sys.mode_count())
        .map(|q| {
            build_pwa_graph(sys, q)
                .expect("mode index in range")
                .signature()
        })
        .collect()
}

/// Vertex subset of an equivalent graph. Induced edges are read from the
/// parent on demand.
#[derive(Clone, Debug)]
pub struct Subgraph<'g> {
    graph: &'g EquivalentGraph,
    nodes: BTreeSet<Vertex>,
}

impl<'g> Subgraph<'g> {
    pub fn new(
        graph: &'g EquivalentGraph,
        nodes: impl IntoIterator<Item = Vertex>,
    ) -> Result<Self, GraphError> {
        let nodes: BTreeSet<Vertex> = nodes.into_iter().collect();
        if let Some(&v) = nodes.iter().find(|&&v| !graph.contains(v)) {
            return Err(GraphError::UnknownVertex(v));
        }
        Ok(Subgraph { graph, nodes })
    }

    pub fn whole(graph: &'g EquivalentGraph) -> Self {
        Subgraph {
            graph,
            nodes: graph.vertices().collect(),
        }
    }

    pub fn parent(&self) -> &'g EquivalentGraph {
        self.graph
    }

    pub fn nodes(&self) -> &BTreeSet<Vertex> {
        &self.nodes
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.nodes.contains(&v)
    }

    pub fn inputs(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.nodes.iter().copied().filter(|v| v.is_input())
    }

    pub fn states(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.nodes.iter().copied().filter(|v| v.is_state())
    }

    /// Parent edges with both ends inside the subgraph.
    pub fn edges(&self) -> impl Iterator<Item = &'g Edge> + '_ {
        let graph = self.graph;
        self.nodes
            .iter()
            .flat_map(move |&v| graph.out_edges(v))
            .filter(|e| self.nodes.contains(&e.target))
    }

    /// Aggregation over the parent graph: union of the vertex sets, with all
    /// parent edges inside the union.
    pub fn aggregate(&self, other: &Subgraph<'g>) -> Result<Subgraph<'g>, GraphError> {
        if !core::ptr::eq(self.graph, other.graph) {
            return Err(GraphError::DifferentParents);
        }
        Ok(Subgraph {
            graph: self.graph,
            nodes: self.nodes.union(&other.nodes).copied().collect(),
        })
    }

    /// Whether the subgraph is a composite system unit: its inputs act only on
    /// its own states and no outside input acts on them.
    pub fn is_csu(&self) -> bool {
        let own_inputs_stay_inside = self
            .inputs()
            .flat_map(|u| self.graph.out_edges(u))
            .all(|e| self.nodes.contains(&e.target));
        let no_foreign_inputs = self
            .states()
            .flat_map(|x| self.graph.in_edges(x))
            .filter(|e| e.source.is_input())
            .all(|e| self.nodes.contains(&e.source));
        own_inputs_stay_inside && no_foreign_inputs
    }

    /// Member vertices with an edge to or from outside the subgraph.
    pub fn frontier(&self) -> BTreeSet<Vertex> {
        self.nodes
            .iter()
            .copied()
            .filter(|&v| {
                self.graph
                    .neighborhood(v)
                    .iter()
                    .any(|w| !self.nodes.contains(w))
            })
            .collect()
    }

    /// Outside vertices adjacent to a member.
    pub fn neighbors(&self) -> BTreeSet<Vertex> {
        self.nodes
            .iter()
            .flat_map(|&v| self.graph.neighborhood(v))
            .filter(|w| !self.nodes.contains(w))
            .collect()
    }
}
