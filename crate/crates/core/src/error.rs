use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BocoError>;

#[derive(Debug, Error)]
pub enum BocoError {
    /// A non-finite or out-of-domain number reached a numeric routine.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// A covariance or Cholesky factorization could not be completed.
    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BocoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BocoError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that come from the numerical core rather than from
    /// the caller's inputs or the filesystem.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            BocoError::NumericDomain(_) | BocoError::Factorization(_)
        )
    }
}
