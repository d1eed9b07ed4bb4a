use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum DipsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tensor must be square (N x N x N x N), got shape {0:?}")]
    NotSquare([usize; 4]),

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("enumeration of {n}! permutations refused (cap is {cap})")]
    EnumerationCap { n: usize, cap: usize },

    #[error("tensor is not degenerate (largest partial average {max_abs:e})")]
    NotDegenerate { max_abs: f64 },

    #[error("matrix is not doubly centered (largest row/column mean {max_abs:e})")]
    NotDoublyCentered { max_abs: f64 },

    #[error("ties present in {0}")]
    Ties(&'static str),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{0} is outside the admissible range")]
    OutOfRange(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DipsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DipsError::InvalidInput(msg.into()))
}
