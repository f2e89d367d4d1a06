use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("system matrix is not stable (spectral abscissa {0:e})")]
    NotStable(f64),
    #[error("system matrix is not diagonalizable (eigenvector condition number {0:e})")]
    NotDiagonalizable(f64),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("line search stalled after {0} backtracking steps")]
    Stall(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate gramian: {0}")]
    Degenerate(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("no convergence after {0} iterations")]
    Convergence(usize),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
}

pub type Result<T> = std::result::Result<T, Error>;
