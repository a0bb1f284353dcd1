//! Twelve-layer model that generates the tree-policy walk `S_0 > ... %`
//! from a tree-format trace.

use treesearch::search::{PolicyKind, SuccessorRule};

use crate::error::{Error, Result};
use crate::fns::{PrunedRegs, Scoring, TokenFn, TreeRegs, TreeStage};
use crate::layout::{Block, Layout};
use crate::model::{copy, Attention, Copy, Embedding, HardAttnModel, Layer, ModelKind, Unembedding};
use crate::token::ModelToken;

/// Large finite stand-in for ±infinity in the policy scores. Greedy sums
/// stay below `100 * (T + 1)`, so this dominates for any practical budget.
pub const SENTINEL: f64 = 1e9;

pub fn scoring_for(policy: PolicyKind) -> Result<Scoring> {
    match policy {
        PolicyKind::UniformPath => Ok(Scoring::Uniform),
        PolicyKind::PathPureExploration => Ok(Scoring::PureExploration),
        PolicyKind::PathGreedy => Ok(Scoring::Greedy),
        PolicyKind::PathUct { c } => Ok(Scoring::Uct { c }),
        other => Err(Error::Malformed(format!("{other} is not a path policy"))),
    }
}

fn block_copy(from: Block, to: Block) -> impl Iterator<Item = Copy> {
    from.range().zip(to.range()).map(|(a, b)| copy(a, b))
}

/// Key/query pair matching one-hot blocks position by position, with a
/// `[BOS]` partner so that a query without matches still has a maximum.
fn match_head(q: Block, k: Block, bias: usize, is_bos: usize) -> Attention {
    let z = q.len;
    let mut qs: Vec<Copy> = q.range().enumerate().map(|(h, r)| copy(r, h)).collect();
    qs.push(copy(bias, z));
    let mut ks: Vec<Copy> = k.range().enumerate().map(|(h, r)| copy(r, h)).collect();
    ks.push(copy(is_bos, z));
    Attention {
        head_dim: z + 1,
        q: qs,
        k: ks,
        v: Vec::new(),
    }
}

/// Embedding dimension is `29 + 7*T*B` for the full-successor variant and
/// `33 + 9*T*B` when fully explored subtrees are pruned.
pub fn build_tree_model(
    budget: usize,
    branching: usize,
    policy: PolicyKind,
    rule: SuccessorRule,
) -> Result<HardAttnModel> {
    if budget == 0 || branching == 0 {
        return Err(Error::Malformed("budget and branching must be positive".into()));
    }
    if rule == SuccessorRule::Literal {
        return Err(Error::Malformed("the one-level successor rule has no construction".into()));
    }
    let scoring = scoring_for(policy)?;
    let n = budget * branching + 1;
    let mut l = Layout::default();
    let mut r = TreeRegs {
        value: l.scalar("value"),
        sep: l.scalar("sep"),
        is_value: l.scalar("isValue"),
        is_sep: l.scalar("isSep"),
        is_gt: l.scalar("isGt"),
        is_q: l.scalar("isQ"),
        is_bos: l.scalar("isBos"),
        is_sep_bos: l.scalar("isSepBos"),
        is_state: l.scalar("isState"),
        bias: l.scalar("bias"),
        q_pos: l.scalar("qPos"),
        value_pos: l.scalar("valuePos"),
        state_pos: l.scalar("statePos"),
        closest_q_pos: l.scalar("closestQPos"),
        parent_pos: l.scalar("parentPos"),
        is_selected: l.scalar("isSelected"),
        was_selected: l.scalar("wasSelected"),
        sel_bos: l.scalar("selBos"),
        iter: l.scalar("iter"),
        pos: l.scalar("pos"),
        id: l.block("id", n),
        vid: l.block("vid", n),
        cid: l.block("cid", n),
        pid: l.block("pid", n),
        psid: l.block("psid", n),
        nsid: l.block("nsid", n),
        oid: l.block("oid", n),
        oid_gt: l.scalar("oid_>"),
        oid_pct: l.scalar("oid_%"),
        pruned: None,
    };
    if rule == SuccessorRule::Pruned {
        r.pruned = Some(PrunedRegs {
            sep_pos: l.scalar("sepPos"),
            child_bos: l.scalar("childBos"),
            anc: l.block("anc", n),
            fsum: l.block("fsum", n),
        });
    }
    let f = |stage| TokenFn::Tree {
        stage,
        regs: Box::new(r),
        scoring,
        rule,
        sentinel: SENTINEL,
    };
    let b = r.bias;

    let closest_q = match r.pruned {
        None => Attention::simple(b, vec![copy(r.q_pos, 0)], vec![copy(r.pos, r.closest_q_pos)]),
        // The latest `?` or `#`; child tokens read the `#` and get 0.
        Some(p) => Attention::simple(b, vec![copy(p.sep_pos, 0)], vec![copy(r.q_pos, r.closest_q_pos)]),
    };
    let explored = match r.pruned {
        None => Attention::none(),
        Some(p) => {
            let mut v: Vec<Copy> = block_copy(p.anc, p.fsum).collect();
            v.push(copy(r.is_bos, p.child_bos));
            Attention {
                head_dim: 1,
                q: vec![copy(b, 0)],
                k: vec![
                    copy(r.is_state, 0),
                    Copy {
                        src: r.is_selected,
                        dst: 0,
                        coef: -1.0,
                    },
                    copy(r.is_bos, 0),
                ],
                v,
            }
        }
    };
    let mut children = match_head(r.psid, r.pid, b, r.is_bos);
    children.v = block_copy(r.id, r.nsid).collect();
    let mut occurrences = match_head(r.id, r.id, b, r.is_bos);
    occurrences.v = vec![copy(r.is_selected, r.was_selected), copy(r.is_bos, r.sel_bos)];

    let layers = vec![
        Layer {
            name: "count iterations".into(),
            attn: Attention::simple(b, vec![copy(r.is_sep_bos, 0)], vec![copy(r.is_bos, r.iter)]),
            f: f(TreeStage::Positions),
        },
        Layer {
            name: "closest query".into(),
            attn: closest_q,
            f: f(TreeStage::KeepStateQuery),
        },
        Layer {
            name: "iteration statistics".into(),
            attn: Attention::simple(
                b,
                vec![copy(r.closest_q_pos, 0)],
                block_copy(r.id, r.vid).chain(block_copy(r.id, r.cid)).collect(),
            ),
            f: f(TreeStage::IterationStats),
        },
        Layer {
            name: "aggregate statistics".into(),
            attn: Attention::simple(
                b,
                vec![copy(r.is_value, 0)],
                block_copy(r.vid, r.vid).chain(block_copy(r.cid, r.cid)).collect(),
            ),
            f: f(TreeStage::Aggregate),
        },
        Layer {
            name: "mark path states".into(),
            attn: Attention::simple(b, vec![copy(r.is_sep, 0)], vec![copy(r.sep, r.is_selected)]),
            f: f(TreeStage::MarkSelected),
        },
        Layer {
            name: "parent positions".into(),
            attn: explored,
            f: f(TreeStage::ParentPos),
        },
        Layer {
            name: "parent ids".into(),
            attn: Attention::simple(b, vec![copy(r.parent_pos, 0)], block_copy(r.id, r.pid).collect()),
            f: f(TreeStage::ChildParent),
        },
        Layer {
            name: "previous state".into(),
            attn: Attention::simple(b, vec![copy(r.state_pos, 0)], block_copy(r.id, r.psid).collect()),
            f: TokenFn::Identity,
        },
        Layer {
            name: "collect children".into(),
            attn: children,
            f: TokenFn::Identity,
        },
        Layer {
            name: "score children".into(),
            attn: Attention::simple(
                b,
                vec![copy(r.value_pos, 0)],
                block_copy(r.cid, r.cid).chain(block_copy(r.vid, r.vid)).collect(),
            ),
            f: f(TreeStage::Score),
        },
        Layer {
            name: "start state".into(),
            attn: Attention::flat(vec![copy(r.is_q, r.oid.at(0))]),
            f: TokenFn::Identity,
        },
        Layer {
            name: "continue or stop".into(),
            attn: occurrences,
            f: f(TreeStage::Continue),
        },
    ];

    let embedding = Embedding {
        pos: r.pos,
        markers: vec![
            (ModelToken::Bos, vec![(r.is_bos, 1.0), (r.is_sep_bos, 1.0), (b, 1.0)]),
            (ModelToken::Query, vec![(r.is_q, 1.0), (r.sep, 1.0), (r.is_sep, 1.0), (b, 1.0)]),
            (ModelToken::Gt, vec![(r.is_gt, 1.0), (b, 1.0)]),
            (ModelToken::Percent, vec![(r.sep, -1.0), (r.is_sep, 1.0), (b, 1.0)]),
            (ModelToken::Hash, vec![(r.is_sep_bos, 1.0), (b, 1.0)]),
        ],
        state: vec![(r.is_state, 1.0), (b, 1.0)],
        state_id: r.id,
        value: vec![(r.is_value, 1.0), (b, 1.0)],
        value_reg: r.value,
        value_scale: 1.0,
        value_offset: 0.0,
    };
    let low = -2.0 * SENTINEL;
    let mut rows: Vec<(ModelToken, Vec<(usize, f64)>)> = (0..n)
        .map(|k| (ModelToken::State(k as u32), vec![(r.oid.at(k), 1.0)]))
        .collect();
    rows.push((ModelToken::Gt, vec![(r.oid_gt, 1.0)]));
    rows.push((ModelToken::Percent, vec![(r.oid_pct, 1.0)]));
    for t in [ModelToken::Bos, ModelToken::Query, ModelToken::Hash] {
        rows.push((t, vec![(b, low)]));
    }
    for c in 0..=100u8 {
        rows.push((ModelToken::Value(c), vec![(b, low)]));
    }
    let model = HardAttnModel {
        kind: ModelKind::Tree { policy, rule },
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
