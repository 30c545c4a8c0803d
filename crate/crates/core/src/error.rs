use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid delay {tau:e} s (must lie in [0, {chirp_duration:e}) s)")]
    InvalidDelay { tau: f64, chirp_duration: f64 },

    #[error("degenerate geometry: point coincides with an antenna at ({x}, {y}, {z})")]
    DegenerateGeometry { x: f64, y: f64, z: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty point set")]
    EmptySet,

    #[error("field is identically zero")]
    EmptyField,

    #[error("index {index} out of range (axis length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("bad magic at byte offset {offset}: found {found:?}")]
    BadMagic { offset: u64, found: [u8; 4] },

    #[error("unsupported format version {version} at byte offset {offset}")]
    VersionUnsupported { offset: u64, version: u32 },

    #[error("truncated file: needed {needed} bytes at byte offset {offset}")]
    TruncatedFile { offset: u64, needed: usize },

    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
