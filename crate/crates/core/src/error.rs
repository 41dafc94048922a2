use std::io;

use thiserror::Error;

/// Errors produced anywhere in the ingest → train → evaluate → alarm pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// A file (dataset header, model file, frame stream) violates its format.
    #[error("format error in `{field}`: {message}")]
    Format { field: String, message: String },

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: expected {expected} values, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty dataset")]
    EmptyDataset,

    /// A parameter or activation became NaN or infinite during training.
    #[error("numeric divergence during epoch {epoch}")]
    Divergence { epoch: usize },

    /// Relative errors are undefined when every target equals its mean.
    #[error("undefined baseline: all targets are identical")]
    UndefinedBaseline,

    #[error("undefined AUC: scores need at least one positive and one negative")]
    UndefinedAuc,

    #[error("frames out of order at timestamp {timestamp}")]
    Ordering { timestamp: String },
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
