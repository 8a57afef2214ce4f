use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:.3e}, tolerance {tolerance:.1e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("{0} did not converge within the iteration cap")]
    NoConvergence(&'static str),

    #[error("function undefined on eigenvalue {0:.3e}")]
    DomainError(f64),

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid qubit count {0} (supported: 1..=6)")]
    InvalidQubits(usize),

    #[error("invalid number of measured effects K = {k} for N = {n}")]
    InvalidK { k: usize, n: usize },

    #[error("no measured effects")]
    EmptyMeasuredSet,

    #[error("no unmeasured effects")]
    EmptyUnmeasuredSet,

    #[error("unmeasured vector carries zero total mass")]
    ZeroMass,

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid configuration: {0}")]
    Config(String),
}
