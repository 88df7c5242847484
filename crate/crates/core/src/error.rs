use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of a numeric operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A NaN or infinity appeared where every value must stay finite.
    #[error("numeric fault in {0}")]
    NumericFault(String),

    #[error("invalid network config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("snapshot is missing a reading from {0}")]
    MissingReading(String),

    #[error("reports were produced on different test splits ({left} vs {right})")]
    SplitMismatch { left: String, right: String },

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    SchemaVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("scenario generation stalled: {0}")]
    Stalled(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
