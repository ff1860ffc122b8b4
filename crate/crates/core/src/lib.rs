#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod clock;
pub mod dmpc;
pub mod error;
pub mod exact;
pub mod fsu;
pub mod generate;
pub mod graph;
pub mod greedy;
pub mod linalg;
pub mod metrics;
