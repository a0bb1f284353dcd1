use serde::{Deserialize, Serialize};

use crate::domain::{Family, StateId, TreeEnv};
use crate::error::{Error, Result};
use crate::rng::{partial_shuffle, RngStream};

use super::check_goal_rewards;

/// Reward table used when a spec does not list its own rewards.
pub const DEFAULT_GOAL_REWARDS: [f64; 8] = [1.0, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// The `k` largest default rewards, descending.
pub fn default_goal_rewards(k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > DEFAULT_GOAL_REWARDS.len() {
        return Err(Error::Param(format!(
            "no default reward table for {k} goals (supported: 1..=8)"
        )));
    }
    Ok(DEFAULT_GOAL_REWARDS[..k].to_vec())
}

const MAX_TREE_STATES: u128 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub branching: usize,
    pub depth: usize,
    pub num_goals: usize,
    pub goal_rewards: Vec<f64>,
    pub seed: u64,
}

impl TreeSpec {
    pub fn new(branching: usize, depth: usize, num_goals: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            branching,
            depth,
            num_goals,
            goal_rewards: default_goal_rewards(num_goals)?,
            seed,
        })
    }

    pub fn num_leaves(&self) -> u128 {
        (self.branching as u128).saturating_pow(self.depth as u32)
    }

    /// Non-root states, `(B^(D+1) - B) / (B - 1)`.
    pub fn accessible_states(&self) -> u128 {
        let b = self.branching as u128;
        (b.saturating_pow(self.depth as u32 + 1) - b) / (b - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(Error::Param("branching factor must be at least 2".into()));
        }
        if self.depth < 1 {
            return Err(Error::Param("depth must be at least 1".into()));
        }
        if self.num_goals < 1 {
            return Err(Error::Param("at least one goal is required".into()));
        }
        if self.goal_rewards.len() != self.num_goals {
            return Err(Error::Param(format!(
                "{} goals but {} rewards",
                self.num_goals,
                self.goal_rewards.len()
            )));
        }
        check_goal_rewards(&self.goal_rewards)?;
        if self.accessible_states() + 1 > MAX_TREE_STATES {
            return Err(Error::Param("tree too large to materialize".into()));
        }
        if self.num_goals as u128 > self.num_leaves() {
            return Err(Error::Param(format!(
                "{} goals requested but only {} leaves",
                self.num_goals,
                self.num_leaves()
            )));
        }
        Ok(())
    }
}

/// Fully materialized tree. State ids are dense; generated trees number
/// them breadth-first.
#[derive(Clone, Debug)]
pub struct SearchTree {
    parent: Vec<Option<StateId>>,
    children: Vec<Vec<StateId>>,
    slot: Vec<usize>,
    depth: Vec<usize>,
    reward: Vec<f64>,
    value: Vec<f64>,
    best: f64,
    truth_len: usize,
}

impl SearchTree {
    /// Builds a tree from per-state child lists; state 0 is the root.
    pub fn from_children(children: Vec<Vec<usize>>, reward: Vec<f64>) -> Result<Self> {
        let n = children.len();
        if n == 0 || reward.len() != n {
            return Err(Error::Param("children and reward tables must be nonempty and aligned".into()));
        }
        let mut parent = vec![None; n];
        let mut slot = vec![0; n];
        for (p, kids) in children.iter().enumerate() {
            for (i, &c) in kids.iter().enumerate() {
                if c >= n || c == 0 || parent[c].is_some() {
                    return Err(Error::Param(format!("state {c} has an invalid parent link")));
                }
                parent[c] = Some(StateId(p as u32));
                slot[c] = i;
            }
        }
        // Reachability from the root rules out cycles among non-root states.
        let mut depth = vec![usize::MAX; n];
        depth[0] = 0;
        let mut order = vec![0usize];
        let mut i = 0;
        while i < order.len() {
            let p = order[i];
            for &c in &children[p] {
                depth[c] = depth[p] + 1;
                order.push(c);
            }
            i += 1;
        }
        if order.len() != n {
            return Err(Error::Param("some states are unreachable from the root".into()));
        }
        for (s, &r) in reward.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Param(format!("reward of state {s} outside [0,1]")));
            }
            if r > 0.0 && !children[s].is_empty() {
                return Err(Error::Param(format!("rewarded state {s} is not a leaf")));
            }
        }
        let mut value = vec![0.0; n];
        for &s in order.iter().rev() {
            value[s] = if children[s].is_empty() {
                reward[s]
            } else {
                children[s].iter().map(|&c| value[c]).sum::<f64>() / children[s].len() as f64
            };
        }
        let best = reward.iter().copied().fold(0.0, f64::max);
        let truth_len = (0..n)
            .filter(|&s| reward[s] == best)
            .map(|s| depth[s])
            .min()
            .unwrap_or(0);
        Ok(Self {
            parent,
            children: children
                .into_iter()
                .map(|k| k.into_iter().map(|c| StateId(c as u32)).collect())
                .collect(),
            slot,
            depth,
            reward,
            value,
            best,
            truth_len,
        })
    }

    /// Perfect `b`-ary tree of depth `d` with breadth-first ids and the given
    /// leaf rewards (indexed by leaf order, left to right).
    pub fn perfect(b: usize, d: usize, leaf_rewards: &[f64]) -> Result<Self> {
        let n_internal = if d == 0 { 0 } else { (b.pow(d as u32) - 1) / (b - 1) };
        let n = n_internal + b.pow(d as u32);
        let mut children = vec![Vec::new(); n];
        for (p, kids) in children.iter_mut().enumerate().take(n_internal) {
            *kids = (p * b + 1..=p * b + b).collect();
        }
        let mut reward = vec![0.0; n];
        for (i, &r) in leaf_rewards.iter().enumerate() {
            reward[n_internal + i] = r;
        }
        Self::from_children(children, reward)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.len() as u32).map(StateId)
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Position of `s` among its parent's children.
    pub fn slot(&self, s: StateId) -> usize {
        self.slot[s.index()]
    }

    /// (state, reward) for every rewarded state, highest reward first.
    pub fn goals(&self) -> Vec<(StateId, f64)> {
        let mut goals: Vec<_> = self
            .states()
            .filter(|&s| self.reward[s.index()] > 0.0)
            .map(|s| (s, self.reward[s.index()]))
            .collect();
        goals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        goals
    }

    pub fn children_of(&self, s: StateId) -> &[StateId] {
        &self.children[s.index()]
    }
}

impl TreeEnv for SearchTree {
    fn family(&self) -> Family {
        Family::Tree
    }

    fn root(&self) -> StateId {
        StateId(0)
    }

    fn children(&self, s: StateId) -> Vec<StateId> {
        self.children[s.index()].clone()
    }

    fn parent(&self, s: StateId) -> Option<StateId> {
        self.parent[s.index()]
    }

    fn depth(&self, s: StateId) -> usize {
        self.depth[s.index()]
    }

    fn reward(&self, s: StateId) -> f64 {
        self.reward[s.index()]
    }

    fn best_reward(&self) -> f64 {
        self.best
    }

    fn truth_path_len(&self) -> usize {
        self.truth_len
    }

    fn segment(&self, s: StateId) -> String {
        if s.0 == 0 {
            "r0d0".to_string()
        } else {
            format!("i{}d{}", self.slot[s.index()], self.depth[s.index()])
        }
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.len())
    }

    fn is_leaf(&self, s: StateId) -> bool {
        self.children[s.index()].is_empty()
    }

    fn true_value(&self, s: StateId) -> f64 {
        self.value[s.index()]
    }
}

/// Perfect B-ary tree with `K` goals on distinct uniformly chosen leaves.
/// Which goal gets which reward is random as well.
pub fn generate_tree(spec: &TreeSpec) -> Result<SearchTree> {
    spec.validate()?;
    let b = spec.branching;
    let d = spec.depth;
    let n_leaves = spec.num_leaves() as usize;
    let mut leaves: Vec<usize> = (0..n_leaves).collect();
    let mut rng = RngStream::new(spec.seed, "tree/goals");
    partial_shuffle(&mut rng, &mut leaves, spec.num_goals);
    let mut leaf_rewards = vec![0.0; n_leaves];
    for (i, &leaf) in leaves.iter().take(spec.num_goals).enumerate() {
        leaf_rewards[leaf] = spec.goal_rewards[i];
    }
    SearchTree::perfect(b, d, &leaf_rewards)
}
