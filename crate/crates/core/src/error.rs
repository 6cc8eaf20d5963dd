use thiserror::Error;

/// Errors raised by the replication engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("maturity {maturity} outside the admissible domain: {reason}")]
    Maturity { maturity: f64, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("path set does not match the request: {0}")]
    GridMismatch(String),

    #[error("matrix is numerically singular (pivot {pivot} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("degenerate value: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
