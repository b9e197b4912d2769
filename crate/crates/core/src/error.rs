use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("degenerate design: no positive singular values")]
    DegenerateDesign,

    #[error("cannot warm-start non-identifiable coordinate {0}")]
    NonIdentifiableWarmStart(usize),

    #[error("posterior corrupted: precision matrix of arm {arm} is not positive definite")]
    PosteriorCorrupted { arm: usize },

    #[error("offline arm starvation: arm `{0}` received no patients")]
    ArmStarvation(String),

    #[error("unknown arm `{0}`")]
    UnknownArm(String),

    #[error("missing coefficient entry for stratum `{0}`")]
    MissingStratum(String),

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("replication {replication} of policy {policy} failed: {source}")]
    Replication {
        policy: String,
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input or configuration rather than by a
    /// failure while running.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::UnknownArm(_)
                | Error::MissingStratum(_)
                | Error::MissingFeature(_)
        )
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
