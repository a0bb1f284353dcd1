use thiserror::Error;

use crate::token::ModelToken;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("token `{0}` is not in the model vocabulary")]
    UnknownToken(ModelToken),
    #[error("sequence needs {needed} state registers but the model has {available}")]
    Capacity { needed: usize, available: usize },
    #[error("hardmax of an empty vector")]
    EmptyHardmax,
    #[error("model emitted `{token}` where {expected} was required")]
    Protocol { token: ModelToken, expected: String },
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error(transparent)]
    Search(#[from] treesearch::Error),
    #[error("model file: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
