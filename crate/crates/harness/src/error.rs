use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Search(#[from] treesearch::Error),

    #[error(transparent)]
    Model(#[from] treesearch_hardattn::Error),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed message `{line}`: {msg}")]
    Malformed { line: String, msg: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("timed out waiting for the peer")]
    Timeout,

    #[error("peer closed the connection")]
    Closed,

    #[error("{0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(format!("json: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(format!("csv: {e}"))
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
