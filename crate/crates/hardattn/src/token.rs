use std::fmt;

use serde::{Deserialize, Serialize};
use treesearch::envs::centi;
use treesearch::tracecodec::SymToken;

/// Vocabulary of the constructed models. Values are carried in hundredths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelToken {
    Bos,
    Query,
    Gt,
    Percent,
    Hash,
    State(u32),
    Value(u8),
}

impl fmt::Display for ModelToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelToken::Bos => f.write_str("[BOS]"),
            ModelToken::Query => f.write_str("?"),
            ModelToken::Gt => f.write_str(">"),
            ModelToken::Percent => f.write_str("%"),
            ModelToken::Hash => f.write_str("#"),
            ModelToken::State(k) => write!(f, "S_{k}"),
            ModelToken::Value(c) => write!(f, "V_{}.{:02}", c / 100, c % 100),
        }
    }
}

impl From<SymToken> for ModelToken {
    fn from(t: SymToken) -> Self {
        match t {
            SymToken::Query => ModelToken::Query,
            SymToken::Percent => ModelToken::Percent,
            SymToken::Hash => ModelToken::Hash,
            SymToken::Bos => ModelToken::Bos,
            SymToken::Gt => ModelToken::Gt,
            SymToken::State(k) => ModelToken::State(k),
            SymToken::Value(v) => ModelToken::Value(centi(v).clamp(0, 100) as u8),
        }
    }
}

pub fn from_symbolic(tokens: &[SymToken]) -> Vec<ModelToken> {
    tokens.iter().map(|&t| t.into()).collect()
}
