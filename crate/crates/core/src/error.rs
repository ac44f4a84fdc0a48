use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, IapError>;

#[derive(Debug, Error)]
pub enum IapError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header {path}: {message}")]
    Header { path: PathBuf, message: String },
    #[error("size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error("unsupported element type `{0}`")]
    UnsupportedType(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid label {0}: labels must be non-negative")]
    NegativeLabel(i64),
    #[error("configuration error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl IapError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IapError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 validation, 2 I/O, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            IapError::Io { .. } | IapError::SizeMismatch { .. } => 2,
            IapError::NonFinite(_) | IapError::Numeric(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        IapError::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        IapError::DimensionMismatch(msg.into())
    }
}
