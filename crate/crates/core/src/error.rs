use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("set is unbounded in the requested direction")]
    Unbounded,

    #[error("problem is infeasible")]
    Infeasible,

    #[error("numerical solver failure: {0}")]
    Solver(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("no robust control invariant terminal set exists for this problem")]
    NoTerminalSet,

    #[error("assumption {assumption} failed: {detail}")]
    Assumption { assumption: u8, detail: String },

    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
