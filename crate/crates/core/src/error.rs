use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("grid mismatch between paths")]
    GridMismatch,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("horizon too short: {0}")]
    Horizon(String),
    #[error("iteration cap exceeded: {0}")]
    IterationCap(String),
    #[error("series diverges: {0}")]
    Divergent(String),
    #[error("empty input")]
    Empty,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
