use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] rankadapt::Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl BenchError {
    pub fn config(msg: impl Into<String>) -> Self {
        BenchError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        BenchError::Io { path: path.into(), message: err.to_string() }
    }

    /// Process exit code: 1 config, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Numerical(_) => 2,
            BenchError::Io { .. } => 3,
        }
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;
