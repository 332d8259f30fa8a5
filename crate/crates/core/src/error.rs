use thiserror::Error;

/// Errors produced by the estimator and its I/O front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("too few points: {available} available, at least {required} required")]
    TooFewPoints { available: usize, required: usize },

    #[error("no structure could be recovered: {0}")]
    StructureNotFound(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
