use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("manifest row {row}: field `{field}`: {message}")]
    Ingest {
        row: usize,
        field: String,
        message: String,
    },

    #[error("unsupported audio format in {path}: {property}")]
    UnsupportedAudio { path: PathBuf, property: String },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("feature table row {row}: {message}")]
    Table { row: usize, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale gradients: adam step requested without a fresh backward pass")]
    StaleGradients,

    #[error("recording `{recording}` is missing stream `{stream}`")]
    MissingStream { recording: String, stream: String },

    #[error("recording `{recording}` stream `{stream}`: {source}")]
    StreamLoad {
        recording: String,
        stream: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
