use std::io;

use thiserror::Error;

/// Failures from parsing the binary container formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("truncated {what}: need {needed} bytes, have {available}")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("trailing data: {0} unexpected bytes after payload")]
    TrailingBytes(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("diverged at {context}")]
    Divergence { context: String },
    #[error("image encoding: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Coarse failure class used by the CLI exit codes and the C ABI.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::Format(_) | Error::Image(_) => ErrorKind::InputOutput,
            Error::Parameter(_) | Error::NonFinite(_) | Error::Bounds(_) | Error::Refused(_) => {
                ErrorKind::Usage
            }
            Error::Shape(_) => ErrorKind::Shape,
            Error::Divergence { .. } => ErrorKind::Divergence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    InputOutput,
    Shape,
    Divergence,
}

pub type Result<T> = std::result::Result<T, Error>;
