use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("{path}:{line}: {msg}")]
    Record {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
