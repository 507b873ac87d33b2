use thiserror::Error;

/// Errors raised by solver construction and the benchmark drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LbmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("direction index {0} out of range (D2Q9 has 9 directions)")]
    IndexOutOfRange(usize),
    #[error("singular parameter: {0}")]
    Singular(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, LbmError>;
