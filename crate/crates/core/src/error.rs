use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every dimension must be at least 1 and rank between 1 and 4")]
    InvalidShape(Vec<usize>),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing forward cache for {0}")]
    MissingCache(&'static str),

    #[error("enumeration guard exceeded: {visible} visible + {hidden} hidden units > {limit}")]
    EnumerationGuard {
        visible: usize,
        hidden: usize,
        limit: usize,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }
}
