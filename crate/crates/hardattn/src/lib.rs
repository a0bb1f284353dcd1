//! Hard-attention transformers that execute tree search policies exactly.
//!
//! A model is a stack of causal single-head attention layers with hardmax
//! scores, each followed by a token-wise function, over a residual stream
//! of named registers. Queries, keys and values only ever copy single
//! registers (coefficients ±1), and decoding is uniform over the tokens
//! with maximal logit.

mod error;
mod fns;
mod layout;
mod leaf;
mod model;
mod run;
mod session;
mod token;
mod tree;

pub use error::{Error, Result};
pub use fns::{LeafRegs, LeafStage, PrunedRegs, Scoring, TokenFn, TreeRegs, TreeStage};
pub use layout::{Block, Layout};
pub use leaf::{build_leaf_model, LeafPolicy};
pub use model::{
    copy, hardmax, Attention, Copy, Embedding, HardAttnModel, Layer, LayerTrace, ModelKind,
    NextTokenDistribution, Unembedding,
};
pub use run::{model_next_state, rollout_with_model, ModelRun};
pub use session::Session;
pub use token::{from_symbolic, ModelToken};
pub use tree::{build_tree_model, scoring_for, SENTINEL};

use treesearch::search::{PolicyKind, SuccessorRule};

/// Builds the construction for any of the six policies. `rule` only
/// matters for path policies.
pub fn build_model(
    policy: PolicyKind,
    budget: usize,
    branching: usize,
    rule: SuccessorRule,
) -> Result<HardAttnModel> {
    match policy {
        PolicyKind::UniformLeaf => build_leaf_model(budget, branching, LeafPolicy::Uniform),
        PolicyKind::GreedyLeaf => build_leaf_model(budget, branching, LeafPolicy::Greedy),
        _ => build_tree_model(budget, branching, policy, rule),
    }
}
