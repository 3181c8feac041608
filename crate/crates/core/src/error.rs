use thiserror::Error;

/// Errors raised by the synthetic control library.
#[derive(Debug, Error)]
pub enum DpscError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular ridge system of dimension {dim} (regularizer {regularizer})")]
    RankDeficient { dim: usize, regularizer: f64 },

    #[error("truncation region [{lo}, {hi}] has acceptance probability {prob:e}")]
    PathologicalTruncation { lo: f64, hi: f64, prob: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DpscError>;
