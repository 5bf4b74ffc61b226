use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decomposition library.
#[derive(Debug, Error)]
pub enum GcpError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("index out of range in mode {mode}: coordinate {coord} not below extent {extent}")]
    IndexOutOfRange { mode: usize, coord: usize, extent: usize },

    #[error("linear index {index} out of range for tensor with {total} entries")]
    LinearIndexOutOfRange { index: u128, total: u128 },

    #[error("index has {got} coordinates, tensor has {expected} modes")]
    ModeCountMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor with {total} entries exceeds the dense materialization limit of {limit}")]
    TooLarge { total: u128, limit: u128 },

    #[error("value outside the loss domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("non-finite loss estimate {value} at epoch {epoch}")]
    NonFinite { epoch: usize, value: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = GcpError> = std::result::Result<T, E>;

impl GcpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GcpError::Io {
            path: path.into(),
            source,
        }
    }
}
