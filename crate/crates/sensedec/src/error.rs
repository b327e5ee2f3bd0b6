use std::path::PathBuf;

/// Crate-wide error type.
///
/// Numerical routines return `InvalidArgument` for caller mistakes that are
/// detectable up front (shape mismatches, out-of-range indices), `Numeric`
/// when a computation produced or would produce non-finite values, and
/// `State` when an object is used in a configuration its invariants forbid.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("state error: {0}")]
    State(String),

    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
