use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest {path}, line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mining error: {0}")]
    Mining(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value detected during {stage}: {detail}")]
    NumericAudit { stage: String, detail: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("clustering error: {0}")]
    Clustering(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
