//! Three-layer model that samples the next state straight from the
//! frontier of a leaf-format trace.

use treesearch::search::PolicyKind;

use crate::error::{Error, Result};
use crate::fns::{LeafRegs, LeafStage, TokenFn};
use crate::layout::Layout;
use crate::model::{copy, Attention, Embedding, HardAttnModel, Layer, ModelKind, Unembedding};
use crate::token::ModelToken;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafPolicy {
    Uniform,
    Greedy,
}

impl LeafPolicy {
    pub fn kind(self) -> PolicyKind {
        match self {
            LeafPolicy::Uniform => PolicyKind::UniformLeaf,
            LeafPolicy::Greedy => PolicyKind::GreedyLeaf,
        }
    }
}

fn markers(r: &LeafRegs) -> Vec<(ModelToken, Vec<(usize, f64)>)> {
    vec![
        (ModelToken::Query, vec![(r.sep, 1.0), (r.is_sep, 1.0), (r.bias, 1.0)]),
        (ModelToken::Hash, vec![(r.sep, -1.0), (r.is_sep, 1.0), (r.bias, 1.0)]),
        (ModelToken::Percent, vec![(r.bias, 1.0)]),
    ]
}

/// Embedding dimension is `10 + T*B`: nine scalar registers and one id
/// register per addressable state.
pub fn build_leaf_model(budget: usize, branching: usize, policy: LeafPolicy) -> Result<HardAttnModel> {
    if budget == 0 || branching == 0 {
        return Err(Error::Malformed("budget and branching must be positive".into()));
    }
    let n_states = budget * branching + 1;
    let mut l = Layout::default();
    let r = LeafRegs {
        value: l.scalar("value"),
        sep: l.scalar("sep"),
        is_value: l.scalar("isValue"),
        is_sep: l.scalar("isSep"),
        is_state: l.scalar("isState"),
        bias: l.scalar("bias"),
        is_visited: l.scalar("isVisited"),
        inh_value: l.scalar("inhValue"),
        pos: l.scalar("pos"),
        id: l.block("id", n_states),
    };
    let (scale, offset) = match policy {
        LeafPolicy::Uniform => (0.0, 1.0),
        LeafPolicy::Greedy => (0.01, 0.0),
    };
    let embedding = Embedding {
        pos: r.pos,
        markers: markers(&r),
        state: vec![(r.is_state, 1.0), (r.bias, 1.0)],
        state_id: r.id,
        value: vec![(r.is_value, 1.0), (r.bias, 1.0)],
        value_reg: r.value,
        value_scale: scale,
        value_offset: offset,
    };
    let layers = vec![
        Layer {
            name: "mark visited".into(),
            attn: Attention::simple(r.bias, vec![copy(r.is_sep, 0)], vec![copy(r.sep, r.is_visited)]),
            f: TokenFn::Leaf {
                stage: LeafStage::MarkValues,
                regs: r,
            },
        },
        Layer {
            name: "inherit parent value".into(),
            attn: Attention::simple(r.bias, vec![copy(r.is_value, 0)], vec![copy(r.value, r.inh_value)]),
            f: TokenFn::Leaf {
                stage: LeafStage::Score,
                regs: r,
            },
        },
        Layer {
            name: "collect scores".into(),
            attn: Attention::simple(
                r.bias,
                vec![copy(r.is_state, 0)],
                r.id.range().map(|i| copy(i, i)).collect(),
            ),
            f: TokenFn::Identity,
        },
    ];
    let mut rows: Vec<(ModelToken, Vec<(usize, f64)>)> = (0..n_states)
        .map(|k| (ModelToken::State(k as u32), vec![(r.id.at(k), 1.0)]))
        .collect();
    for t in [ModelToken::Query, ModelToken::Percent, ModelToken::Hash] {
        rows.push((t, vec![(r.bias, -1.0)]));
    }
    for c in 0..=100u8 {
        rows.push((ModelToken::Value(c), vec![(r.bias, -1.0)]));
    }
    let model = HardAttnModel {
        kind: ModelKind::Leaf { policy: policy.kind() },
        budget,
        branching,
        layout: l,
        embedding,
        layers,
        unembedding: Unembedding { rows },
    };
    model.validate()?;
    Ok(model)
}
