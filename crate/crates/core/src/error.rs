use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VadError>;

#[derive(Debug, Error)]
pub enum VadError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),

    #[error("corrupt data: {0}")]
    Corruption(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("fold leakage: {0}")]
    Leakage(String),

    #[error("outer fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<VadError>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl VadError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        VadError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        VadError::Config(msg.into())
    }

    /// The innermost error, looking through fold wrappers.
    pub fn root(&self) -> &VadError {
        match self {
            VadError::Fold { source, .. } => source.root(),
            other => other,
        }
    }
}
