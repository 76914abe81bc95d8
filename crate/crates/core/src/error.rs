use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or invalid input data. `location` names the row or line.
    #[error("{location}: {message}")]
    Load { location: String, message: String },

    #[error("unknown ingredient `{0}`")]
    UnknownIngredient(String),

    #[error("ingredient id {id} out of range for vocabulary of {vocab_size}")]
    IngredientOutOfRange { id: usize, vocab_size: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("negative samples contain the target ingredient {0}")]
    TargetInNegatives(usize),

    #[error("ingredient {0} has a zero-norm embedding")]
    ZeroNorm(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model incompatible with corpus: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn load(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
