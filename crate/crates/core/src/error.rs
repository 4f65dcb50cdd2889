use thiserror::Error;

use crate::metrics::SyntaxError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingest { row: usize, message: String },

    #[error("ingestion error: {0}")]
    IngestEmpty(String),

    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown student {0:?}")]
    UnknownStudent(String),

    #[error("unknown problem {0:?}")]
    UnknownProblem(String),

    #[error("sequence of length {len} exceeds max_len {max_len}")]
    Overlength { len: usize, max_len: usize },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
