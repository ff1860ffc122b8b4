//! Centralized and distributed MPC on partitioned linear networks.

pub mod admm;
pub mod mpc;
pub mod qp;
pub mod sim;
pub mod split;

pub use admm::{DmpcController, StepReport};
pub use mpc::{CentralizedMpc, Scenario};
pub use qp::{qp_solve, QpSettings, QpSolution, QpSolver};
pub use sim::{simulate, RunMetrics, StepRecord};
pub use split::{reassemble, split_system, Coupling, CsuSystem};
