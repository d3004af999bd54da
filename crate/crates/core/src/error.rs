use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible: cell {cell} has positive supply but an empty dispatch neighborhood")]
    Infeasible { cell: usize },

    #[error("solver did not converge after {iterations} pivots")]
    Solver { iterations: usize },

    #[error("index undefined: {0}")]
    UndefinedIndex(String),

    #[error("inconsistent market state: {0}")]
    Inconsistent(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } => 3,
            Error::Solver { .. } => 4,
            _ => 2,
        }
    }
}
