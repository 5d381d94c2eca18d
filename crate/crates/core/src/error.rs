use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block {0} has an unknown parent")]
    UnknownParent(u64),
    #[error("child timestamp {child} does not exceed parent timestamp {parent}")]
    NonMonotonicTimestamp { parent: f64, child: f64 },
    #[error("fork set has no chains")]
    EmptyFork,
    #[error("malformed fork: {0}")]
    MalformedFork(String),
    #[error("winner index {index} out of range for {chains} chains")]
    InvalidWinner { index: usize, chains: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("allowed action set is empty")]
    NoAllowedActions,
    #[error("curve must be sorted by alpha and contain at least two points")]
    InvalidCurve,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Plan {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("run panicked (policy {policy}, alpha {alpha}, seed {seed}): {message}")]
    RunPanicked {
        policy: String,
        alpha: f64,
        seed: u64,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
