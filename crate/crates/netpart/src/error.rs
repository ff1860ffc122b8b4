use std::io;
use std::path::PathBuf;

use netpart_core::error::{Error as CoreError, FsuError, ModelError, PartitionError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                CoreError::Model(_) => "model",
                CoreError::Jacobian(_) => "jacobian",
                CoreError::Graph(_) => "graph",
                CoreError::Fsu(_) => "fsu",
                CoreError::Partition(_) => "partition",
                CoreError::Qp(_) => "qp",
                CoreError::Sim(_) => "simulation",
            },
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
            CliError::Format(_) => "format",
            CliError::Usage(_) => "usage",
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

via_core!(ModelError, FsuError, PartitionError, SimError);
