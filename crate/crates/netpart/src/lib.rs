//! File formats, wall clock and command-line front end for `netpart-core`.

pub mod cli;
pub mod clock;
pub mod error;
pub mod formats;

pub use clock::StdClock;
pub use error::CliError;
