use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] thermoflow_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] io::Error),
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    SuiteFailed(String),
}

impl CliError {
    /// 2 for bad input, 3 for physically unsolvable requests, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        use thermoflow_core::Error as E;
        match self {
            CliError::Core(E::Solvability(_)) => 3,
            CliError::Core(E::Numerical(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Read { .. } | CliError::Write(_) => 2,
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::SuiteFailed(_) => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Write(io::Error::other(e))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
