use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("artifact schema mismatch: {0}")]
    Schema(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] pendulum_core::Error),
    #[error("simulation halted at t = {time}: {reason}")]
    Halted { time: f64, reason: String },
    #[error("verdict failed: {0}")]
    Verdict(String),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 solver or I/O, 4 verdict.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Schema(_) => 2,
            LabError::Solver(pendulum_core::Error::Param(_)) => 2,
            LabError::Io { .. } | LabError::Solver(_) | LabError::Halted { .. } => 3,
            LabError::Verdict(_) => 4,
        }
    }
}
