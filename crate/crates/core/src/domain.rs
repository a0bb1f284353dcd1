//! States, trajectories and the frontier.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::pick;

/// Opaque state handle, unique within one problem instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Problem family; decides how states are named in traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tree,
    Nav,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Tree => "tree",
            Family::Nav => "nav",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Family::Tree),
            "nav" => Ok(Family::Nav),
            other => Err(Error::Param(format!("unknown family `{other}`"))),
        }
    }
}

/// The hidden environment. Agents only ever see the root, the children of
/// states they visit, and sampled values.
pub trait TreeEnv: Send + Sync {
    fn family(&self) -> Family;

    fn root(&self) -> StateId;

    /// Successors in the environment's canonical order.
    fn children(&self, s: StateId) -> Vec<StateId>;

    fn parent(&self, s: StateId) -> Option<StateId>;

    fn depth(&self, s: StateId) -> usize;

    fn reward(&self, s: StateId) -> f64;

    /// Largest reward present anywhere in the tree.
    fn best_reward(&self) -> f64;

    /// Shortest depth at which the best reward can be reached.
    fn truth_path_len(&self) -> usize;

    /// Name of the last edge into `s` (the root's own name for the root).
    fn segment(&self, s: StateId) -> String;

    /// Number of states including the root, when the tree is materialized.
    fn num_states(&self) -> Option<usize> {
        None
    }

    fn name(&self, s: StateId) -> String {
        self.path_from_root(s)
            .into_iter()
            .map(|x| self.segment(x))
            .collect::<Vec<_>>()
            .join(">")
    }

    fn lookup(&self, name: &str) -> Option<StateId> {
        let mut parts = name.split('>');
        let root = self.root();
        if parts.next()? != self.segment(root) {
            return None;
        }
        let mut cur = root;
        for part in parts {
            cur = self
                .children(cur)
                .into_iter()
                .find(|&c| self.segment(c) == part)?;
        }
        Some(cur)
    }

    fn path_from_root(&self, s: StateId) -> Vec<StateId> {
        let mut path = vec![s];
        let mut cur = s;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    fn is_leaf(&self, s: StateId) -> bool {
        self.children(s).is_empty()
    }

    /// Reward of the leaf reached by uniform random descent from `s`.
    fn sample_rollout(&self, s: StateId, rng: &mut dyn RngCore) -> f64 {
        let mut cur = s;
        loop {
            let kids = self.children(cur);
            if kids.is_empty() {
                return self.reward(cur);
            }
            cur = kids[pick(rng, kids.len())];
        }
    }

    /// Exact expected leaf reward under uniform random descent.
    fn true_value(&self, s: StateId) -> f64 {
        let kids = self.children(s);
        if kids.is_empty() {
            return self.reward(s);
        }
        kids.iter().map(|&c| self.true_value(c)).sum::<f64>() / kids.len() as f64
    }
}

/// One entry of a trajectory: the selected state, its sampled value and the
/// children revealed by visiting it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state: StateId,
    pub value: f64,
    pub children: Vec<StateId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(steps: Vec<StepRecord>) -> Self {
        Self { steps }
    }

    pub fn states(&self) -> Vec<StateId> {
        self.steps.iter().map(|s| s.state).collect()
    }

    /// Number of selections after the root step.
    pub fn num_selections(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Checks the trajectory against the environment: root first, every
    /// later state taken from the frontier, children as the tree reports.
    pub fn validate(&self, tree: &dyn TreeEnv) -> Result<()> {
        let first = self
            .steps
            .first()
            .ok_or_else(|| Error::Structure("empty trajectory".into()))?;
        if first.state != tree.root() {
            return Err(Error::Structure("trajectory does not start at the root".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.children != tree.children(step.state) {
                return Err(Error::Structure(format!(
                    "step {i}: children differ from the environment"
                )));
            }
            if !(0.0..=1.0).contains(&step.value) {
                return Err(Error::Structure(format!("step {i}: value out of [0,1]")));
            }
        }
        frontier_after(&self.steps).map(|_| ())
    }
}

/// Revealed but unvisited states, kept in order of first revelation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Frontier {
    members: Vec<StateId>,
    parent_of: HashMap<StateId, StateId>,
}

impl Frontier {
    pub fn members(&self) -> &[StateId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.parent_of.contains_key(&s)
    }

    pub fn parent_of(&self, s: StateId) -> Option<StateId> {
        self.parent_of.get(&s).copied()
    }

    pub fn index_of(&self, s: StateId) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        self.members.iter().position(|&m| m == s)
    }

    pub fn push(&mut self, s: StateId, parent: StateId) {
        if self.parent_of.insert(s, parent).is_none() {
            self.members.push(s);
        }
    }

    /// Removes `s`, keeping the order of the remaining members.
    pub fn remove(&mut self, s: StateId) -> bool {
        if self.parent_of.remove(&s).is_none() {
            return false;
        }
        if let Some(i) = self.members.iter().position(|&m| m == s) {
            self.members.remove(i);
        }
        true
    }
}

/// Frontier after the given trajectory prefix: all revealed children minus
/// all visited states.
pub fn frontier_after(prefix: &[StepRecord]) -> Result<Frontier> {
    let first = prefix
        .first()
        .ok_or_else(|| Error::Structure("empty prefix".into()))?;
    let mut frontier = Frontier::default();
    let mut revealed: HashSet<StateId> = HashSet::new();
    revealed.insert(first.state);
    for (i, step) in prefix.iter().enumerate() {
        if i > 0 && !frontier.remove(step.state) {
            return Err(Error::Structure(format!(
                "step {i}: {} was not in the frontier",
                step.state
            )));
        }
        for &c in &step.children {
            if !revealed.insert(c) {
                return Err(Error::Structure(format!(
                    "step {i}: child {c} was already revealed by another parent"
                )));
            }
            frontier.push(c, step.state);
        }
    }
    Ok(frontier)
}

/// True when neither `s` nor anything below it is in the frontier. Only
/// descends through visited states, so `s` must already be revealed.
pub fn is_fully_explored(s: StateId, frontier: &Frontier, tree: &dyn TreeEnv) -> bool {
    if frontier.contains(s) {
        return false;
    }
    tree.children(s)
        .into_iter()
        .all(|c| is_fully_explored(c, frontier, tree))
}

/// The one-level check: `s` is visited and none of its immediate children is
/// in the frontier. Can report a subtree as open when it is not, and the
/// other way round; kept for comparison only.
pub fn is_fully_explored_literal(s: StateId, frontier: &Frontier, tree: &dyn TreeEnv) -> bool {
    if frontier.contains(s) {
        return false;
    }
    tree.children(s).into_iter().all(|c| !frontier.contains(c))
}

/// Children of `s` whose subtrees still contain frontier states.
pub fn modified_successors(s: StateId, frontier: &Frontier, tree: &dyn TreeEnv) -> Vec<StateId> {
    tree.children(s)
        .into_iter()
        .filter(|&c| !is_fully_explored(c, frontier, tree))
        .collect()
}

/// Highest reward among visited states.
pub fn best_reward(t: &Trajectory, tree: &dyn TreeEnv) -> f64 {
    t.steps
        .iter()
        .map(|s| tree.reward(s.state))
        .fold(0.0, f64::max)
}
