use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input too short: need at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("bad format in {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version { what: &'static str, found: u32, expected: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("unexpected tensor `{0}`")]
    UnexpectedTensor(String),

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape { name: String, found: Vec<usize>, expected: Vec<usize> },

    #[error("model/config mismatch: {0}")]
    ModelMismatch(String),

    #[error("noise tracker is not initialized")]
    Uninitialized,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by malformed or inconsistent file contents, as
    /// opposed to failures to read or write them.
    pub fn is_validation(&self) -> bool {
        !self.is_io()
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Wav(hound::Error::IoError(_)))
    }
}
