use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("malformed trajectory: {0}")]
    Structure(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("frontier is empty")]
    Exhausted,

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error in iteration {iteration}: {msg}")]
    Parse { iteration: usize, msg: String },

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("index {index} out of range for a frontier of {len} states (iteration {iteration})")]
    IndexRange {
        iteration: usize,
        index: usize,
        len: usize,
    },

    #[error("value token `{0}` is not on the 0.01 grid")]
    OffGrid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
