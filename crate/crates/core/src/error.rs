use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::Vertex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
}

/// Problems with a system description.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("matrix {name} is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Dimension {
        name: String,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("vector {name} has length {len}, expected {expected}")]
    VectorLength {
        name: String,
        len: usize,
        expected: usize,
    },
    #[error("matrix {name} contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        name: String,
        row: usize,
        col: usize,
    },
    #[error("a piecewise-affine system needs at least one mode")]
    NoModes,
    #[error("mode {mode} out of range (system has {count} modes)")]
    ModeOutOfRange { mode: usize, count: usize },
    #[error("point lies in the interior of modes {first} and {second}")]
    OverlappingModes { first: usize, second: usize },
    #[error("point lies in no mode region")]
    NoActiveMode,
    #[error("expected a {expected} system, got {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
}

/// Failure of a Jacobian evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JacobianError {
    #[error("jacobian entry d f[{row}] / d {column:?} is not finite")]
    NonFinite { row: usize, column: Vertex },
    #[error("jacobian has shape mismatch in {block}")]
    Shape { block: &'static str },
    #[error("evaluation point has wrong dimension (x: {x_len}, u: {u_len})")]
    Point { x_len: usize, u_len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("subgraphs come from different parent graphs")]
    DifferentParents,
    #[error("vertex {0:?} does not belong to the graph")]
    UnknownVertex(Vertex),
    #[error("edge {from:?} -> {to:?} ends in an input vertex")]
    EdgeIntoInput { from: Vertex, to: Vertex },
    #[error("edge {from:?} -> {to:?} has zero or non-finite weight")]
    BadWeight { from: Vertex, to: Vertex },
    #[error("edge {from:?} -> {to:?} given twice")]
    DuplicateEdge { from: Vertex, to: Vertex },
    #[error("label vector has length {len}, expected {expected}")]
    Labels { len: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FsuError {
    #[error("input u{} has no outgoing edge", .0 + 1)]
    IdleInput(usize),
    #[error("state vertices without any edge: {0:?}")]
    OrphanStates(Vec<usize>),
    #[error("state vertices not connected to any input: {0:?}")]
    Unattachable(Vec<usize>),
    #[error("FSU group {0} is empty, overlaps another group or names an unknown vertex")]
    MalformedGroup(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("FSU {0} appears in more than one block")]
    Duplicate(usize),
    #[error("FSU {fsu} out of range (collection has {count})")]
    OutOfRange { fsu: usize, count: usize },
    #[error("FSU {0} is not assigned to any block")]
    Unassigned(usize),
    #[error("assignment row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: usize },
    #[error("assignment matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("granularity must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("kappa must be finite and positive, got {0}")]
    InvalidKappa(f64),
    #[error("the condensed graph has no nonzero coupling")]
    NoCoupling,
    #[error("brute force is limited to {limit} FSUs, got {count}; use branch and bound")]
    TooLarge { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("quadratic term is {rows}x{cols}, expected {n}x{n}")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("lower bound exceeds upper bound at index {0}")]
    Bounds(usize),
    #[error("no convergence after {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(&'static str),
    #[error("state {state} is not covered by the partition")]
    Uncovered { state: usize },
    #[error("input u{} of block {block} drives state x{} of another block", .input + 1, .state + 1)]
    InputLeak {
        block: usize,
        input: usize,
        state: usize,
    },
    #[error("partition does not match the FSU collection")]
    Mismatch,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Umbrella error for callers that chain several stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Jacobian(#[from] JacobianError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Fsu(#[from] FsuError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
