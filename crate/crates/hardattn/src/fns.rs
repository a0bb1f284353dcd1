//! Token-wise functions of the constructions, evaluated exactly on the
//! named registers they read.

use serde::{Deserialize, Serialize};
use treesearch::envs::from_centi;
use treesearch::search::{uct_score, SuccessorRule};

use crate::layout::Block;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafRegs {
    pub value: usize,
    pub sep: usize,
    pub is_value: usize,
    pub is_sep: usize,
    pub is_state: usize,
    pub bias: usize,
    pub is_visited: usize,
    pub inh_value: usize,
    pub pos: usize,
    pub id: Block,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedRegs {
    pub sep_pos: usize,
    pub child_bos: usize,
    pub anc: Block,
    pub fsum: Block,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRegs {
    pub value: usize,
    pub sep: usize,
    pub is_value: usize,
    pub is_sep: usize,
    pub is_gt: usize,
    pub is_q: usize,
    pub is_bos: usize,
    pub is_sep_bos: usize,
    pub is_state: usize,
    pub bias: usize,
    pub q_pos: usize,
    pub value_pos: usize,
    pub state_pos: usize,
    pub closest_q_pos: usize,
    pub parent_pos: usize,
    pub is_selected: usize,
    pub was_selected: usize,
    pub sel_bos: usize,
    pub iter: usize,
    pub pos: usize,
    pub id: Block,
    pub vid: Block,
    pub cid: Block,
    pub pid: Block,
    pub psid: Block,
    pub nsid: Block,
    pub oid: Block,
    pub oid_gt: usize,
    pub oid_pct: usize,
    pub pruned: Option<PrunedRegs>,
}

/// Child scoring rule of the tree model's policy layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scoring {
    Uniform,
    PureExploration,
    Greedy,
    Uct { c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafStage {
    /// Value tokens get `isValue = 1 + pos` so later tokens win ties.
    MarkValues,
    /// State tokens write their score into their own id register.
    Score,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeStage {
    Positions,
    KeepStateQuery,
    IterationStats,
    Aggregate,
    MarkSelected,
    ParentPos,
    ChildParent,
    Score,
    Continue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "kebab-case")]
pub enum TokenFn {
    Identity,
    Leaf {
        stage: LeafStage,
        regs: LeafRegs,
    },
    Tree {
        stage: TreeStage,
        regs: Box<TreeRegs>,
        scoring: Scoring,
        rule: SuccessorRule,
        sentinel: f64,
    },
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn zero(x: &mut [f64], b: Block) {
    for r in b.range() {
        x[r] = 0.0;
    }
}

impl TokenFn {
    /// Registers this function may overwrite.
    pub fn writes(&self) -> Vec<usize> {
        match self {
            TokenFn::Identity => Vec::new(),
            TokenFn::Leaf { stage, regs } => match stage {
                LeafStage::MarkValues => vec![regs.is_value],
                LeafStage::Score => regs.id.range().collect(),
            },
            TokenFn::Tree { stage, regs, .. } => {
                let r = regs;
                let mut w: Vec<usize> = match stage {
                    TreeStage::Positions => vec![r.q_pos, r.value_pos, r.state_pos],
                    TreeStage::KeepStateQuery => vec![r.closest_q_pos],
                    TreeStage::IterationStats | TreeStage::Aggregate => {
                        r.cid.range().chain(r.vid.range()).collect()
                    }
                    TreeStage::MarkSelected => vec![r.is_selected],
                    TreeStage::ParentPos => vec![r.parent_pos],
                    TreeStage::ChildParent => r.pid.range().collect(),
                    TreeStage::Score | TreeStage::Continue => {
                        let mut v: Vec<usize> = r.oid.range().collect();
                        v.extend([r.oid_gt, r.oid_pct]);
                        v
                    }
                };
                if let Some(p) = r.pruned {
                    match stage {
                        TreeStage::Positions => w.push(p.sep_pos),
                        TreeStage::IterationStats => w.extend(p.anc.range()),
                        _ => {}
                    }
                }
                w
            }
        }
    }

    pub fn apply(&self, x: &mut [f64]) {
        match self {
            TokenFn::Identity => {}
            TokenFn::Leaf { stage, regs } => leaf_apply(*stage, regs, x),
            TokenFn::Tree {
                stage,
                regs,
                scoring,
                rule,
                sentinel,
            } => tree_apply(*stage, regs, *scoring, *rule, *sentinel, x),
        }
    }
}

fn leaf_apply(stage: LeafStage, r: &LeafRegs, x: &mut [f64]) {
    match stage {
        LeafStage::MarkValues => {
            x[r.is_value] += x[r.is_value] * x[r.pos];
        }
        LeafStage::Score => {
            if x[r.is_state] != 1.0 {
                return;
            }
            let score = if x[r.is_visited] == 0.0 {
                1.0 + x[r.inh_value]
            } else {
                -3.0
            };
            for i in r.id.range() {
                if x[i] == 1.0 {
                    x[i] = score;
                }
            }
        }
    }
}

fn tree_apply(stage: TreeStage, r: &TreeRegs, scoring: Scoring, rule: SuccessorRule, sent: f64, x: &mut [f64]) {
    let is_state = x[r.is_state] == 1.0;
    match stage {
        TreeStage::Positions => {
            x[r.q_pos] = x[r.is_q] * x[r.pos];
            x[r.value_pos] = x[r.is_value] * x[r.pos];
            x[r.state_pos] = x[r.is_state] * x[r.pos];
            if let Some(p) = r.pruned {
                // `?` and `#`: the separators that open a path or a child list.
                x[p.sep_pos] = (x[r.is_q] + x[r.is_sep_bos] - x[r.is_bos]) * x[r.pos];
            }
        }
        TreeStage::KeepStateQuery => {
            if !is_state {
                x[r.closest_q_pos] = 0.0;
            }
        }
        TreeStage::IterationStats => {
            if x[r.is_value] == 1.0 {
                for i in 0..r.cid.len {
                    let on_path = flag(x[r.cid.at(i)] > 0.0);
                    x[r.cid.at(i)] = on_path;
                    x[r.vid.at(i)] = x[r.value] * on_path;
                }
                return;
            }
            if let Some(p) = r.pruned {
                if is_state && x[r.closest_q_pos] == 0.0 {
                    for i in 0..r.cid.len {
                        x[p.anc.at(i)] = flag(x[r.cid.at(i)] > 0.0);
                    }
                }
            }
            zero(x, r.cid);
            zero(x, r.vid);
        }
        TreeStage::Aggregate => {
            if x[r.is_value] != 1.0 {
                zero(x, r.cid);
                zero(x, r.vid);
                return;
            }
            // The residual holds this iteration's own indicator plus the
            // mean over all m iterations; undo the mean exactly.
            let m = (1.0 / x[r.iter]).round();
            for i in 0..r.cid.len {
                let a = (x[r.cid.at(i)] * m).round();
                let own = flag(a > m);
                let av = (x[r.vid.at(i)] * m).round();
                x[r.cid.at(i)] = a - own * m;
                x[r.vid.at(i)] = av - own * x[r.value] * m;
            }
        }
        TreeStage::MarkSelected => {
            x[r.is_selected] = flag(is_state && x[r.is_selected] > 0.0);
        }
        TreeStage::ParentPos => {
            x[r.parent_pos] = x[r.is_state] * x[r.is_selected] * x[r.pos];
        }
        TreeStage::ChildParent => {
            if !(is_state && x[r.is_selected] == 0.0) {
                zero(x, r.pid);
            }
        }
        TreeStage::Score => {
            if x[r.is_gt] != 1.0 {
                return;
            }
            let parent_count: f64 = (0..r.psid.len).map(|i| x[r.psid.at(i)] * x[r.cid.at(i)]).sum();
            for i in 0..r.oid.len {
                let count = x[r.cid.at(i)];
                let mut candidate = x[r.nsid.at(i)] > 0.0;
                if let (Some(p), SuccessorRule::Pruned) = (r.pruned, rule) {
                    if candidate && count > 0.0 {
                        let desc = (x[p.fsum.at(i)] / x[p.child_bos]).round();
                        candidate = desc + 1.0 != count;
                    }
                }
                let score = if !candidate {
                    -sent
                } else {
                    match scoring {
                        Scoring::Uniform => 1.0,
                        Scoring::PureExploration => -count,
                        Scoring::Greedy if count == 0.0 => sent,
                        Scoring::Greedy => from_centi(x[r.vid.at(i)] as i64),
                        Scoring::Uct { .. } if count == 0.0 => sent,
                        Scoring::Uct { c } => {
                            uct_score(x[r.vid.at(i)] as i64, count as u32, parent_count as u32, c)
                        }
                    }
                };
                x[r.oid.at(i)] = score;
            }
            x[r.oid_gt] = -sent;
            x[r.oid_pct] = -sent;
        }
        TreeStage::Continue => {
            if !is_state {
                return;
            }
            let selections = (x[r.was_selected] / x[r.sel_bos]).round();
            let has_children = r.nsid.range().any(|i| x[i] > 0.0);
            let go_on = x[r.is_selected] == 1.0 && selections >= 2.0 && has_children;
            zero(x, r.oid);
            x[r.oid_gt] = flag(go_on);
            x[r.oid_pct] = flag(!go_on);
        }
    }
}
