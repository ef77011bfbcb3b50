use std::io;

/// Errors raised by the preprocessing pipeline and its file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate channel: subband {subband} is all zero")]
    DegenerateChannel { subband: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(offset: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    /// True for failures caused by the filesystem or by malformed files,
    /// as opposed to violated call contracts.
    pub fn is_io_or_format(&self) -> bool {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Format { .. } => true,
            Error::Sample { source, .. } => source.is_io_or_format(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
