use std::path::PathBuf;

use crate::harness::MetricsReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition (lengths, ranges, set sizes).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A residual left the finite range or exceeded the divergence guard.
    #[error("adaptive filter diverged at sample {sample}")]
    Diverged { sample: u64 },

    #[error("meta-training diverged in epoch {epoch} at inner step {sample}")]
    InnerDiverged { epoch: usize, sample: u64 },

    /// Scenario runs keep everything computed before the blow-up.
    #[error("scenario diverged at t = {at_sec:.4} s")]
    ScenarioDiverged {
        at_sec: f64,
        partial: Box<MetricsReport>,
    },

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed content in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("non-finite value in {path} at entry {index}")]
    NonFinite { path: PathBuf, index: usize },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
