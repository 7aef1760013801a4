use std::io;

use thiserror::Error;

/// Errors produced by the enhancement library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its supported range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller passed buffers of the wrong shape or called out of order.
    #[error("usage error: {0}")]
    Usage(String),

    /// A binary file (weights, feature records, WAV) is malformed.
    #[error("format error at byte {offset}{}: {message}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    Format {
        offset: usize,
        layer: Option<usize>,
        message: String,
    },

    /// Sample-rate pair without an integer bin mapping.
    #[error("unsupported rate conversion {from} Hz -> {to} Hz")]
    UnsupportedRate { from: u32, to: u32 },

    /// A training example could not be produced from its inputs.
    #[error("example rejected: {0}")]
    Rejected(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            layer: None,
            message: message.into(),
        }
    }

    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}

impl From<hound::Error> for Error {
    fn from(err: hound::Error) -> Self {
        match err {
            hound::Error::IoError(e) if matches!(e.kind(), io::ErrorKind::UnexpectedEof | io::ErrorKind::Other) => {
                Error::format(0, format!("truncated file: {e}"))
            }
            hound::Error::IoError(e) => Error::Io(e),
            other => Error::format(0, other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
