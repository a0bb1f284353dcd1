//! Token formats for trajectories.
//!
//! The empirical format lists the whole frontier with 0-based indices each
//! iteration and is what learned models are trained on. The symbolic
//! formats (`?`, `%`, `#`, `>` markers with numbered state tokens) are the
//! inputs of the hand-built attention models.

mod empirical;
mod symbolic;
mod vocab;

use serde::{Deserialize, Serialize};

pub use empirical::{decode_empirical, encode_empirical, parse_empirical, Token, TraceRecord};
pub use symbolic::{encode_leaf_theoretical, encode_tree_theoretical, StateNumbering, SymToken, SymTrace};
pub use vocab::Vocab;

use crate::domain::{StateId, TreeEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    LeafTheoretical,
    TreeTheoretical,
    EmpiricalTree,
    EmpiricalNav,
}

impl TraceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceFormat::LeafTheoretical => "leaf-theoretical",
            TraceFormat::TreeTheoretical => "tree-theoretical",
            TraceFormat::EmpiricalTree => "empirical-tree",
            TraceFormat::EmpiricalNav => "empirical-nav",
        }
    }
}

/// Trace name of a state: segments along the root path joined by `>`,
/// e.g. `r0d0>i2d1` or `x0y0>x0y1`.
pub fn state_name(tree: &dyn TreeEnv, s: StateId) -> String {
    tree.name(s)
}
