use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the calibration / evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a domain invariant (bad alpha, label out of range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// TPR or FPR is undefined because only one abstention class is present.
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// A data file could not be parsed. `line` is 1-based.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// A persisted artifact (thresholds, manifest, config) is invalid or unwritable.
    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
