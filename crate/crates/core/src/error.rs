use std::path::PathBuf;

use thiserror::Error;

use crate::optimizers::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: cannot parse {token:?}: {reason}")]
    Parse {
        line: usize,
        token: String,
        reason: String,
    },

    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Reference estimator norm below the degenerate-denominator floor.
    #[error("degenerate conjugate denominator ({0:e})")]
    DegenerateDenominator(f64),

    #[error("line search failed: {0}")]
    SearchFailure(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("run diverged at epoch {epoch}: objective {objective}")]
    Divergence {
        epoch: usize,
        objective: f64,
        trace: Box<RunTrace>,
    },

    #[error("experiment spec: {path}: {reason}")]
    Spec { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by unreadable or malformed input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Format { .. } | Error::Io { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
