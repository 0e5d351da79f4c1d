use std::path::PathBuf;

use thiserror::Error;

use crate::llmclient::ParaphraseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("line {line}: duplicate article id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty vocabulary after pruning with min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },

    #[error("feature index {index} out of bounds for vocabulary of size {size}")]
    FeatureOutOfBounds { index: usize, size: usize },

    #[error("incompatible format: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Paraphrase(#[from] ParaphraseError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a human-readable location, e.g. `"variant news-only, seed 3"`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True when the root cause is a network failure talking to a model endpoint.
    pub fn is_network(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_network(),
            Error::Paraphrase(e) => e.is_network(),
            _ => false,
        }
    }
}
