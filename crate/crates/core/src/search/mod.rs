//! Reference search policies.
//!
//! Leaf policies pick directly from the frontier. Path policies walk down
//! from the root each step and stop at the first frontier state they reach.

mod dist;
mod state;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{StateId, Trajectory, TreeEnv};
use crate::envs::ValueEstimator;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use dist::{next_state_distribution, DistMode, NextStateDistribution};
pub use state::{SearchState, Selection};
pub use stats::{backpropagate, traversal_score, uct_score, TreeStats};

/// Exploration constant used for UCT unless configured otherwise.
pub const DEFAULT_UCT_C: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    UniformLeaf,
    GreedyLeaf,
    UniformPath,
    PathPureExploration,
    PathGreedy,
    PathUct { c: f64 },
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::UniformLeaf,
        PolicyKind::GreedyLeaf,
        PolicyKind::UniformPath,
        PolicyKind::PathPureExploration,
        PolicyKind::PathGreedy,
        PolicyKind::PathUct { c: DEFAULT_UCT_C },
    ];

    pub fn is_leaf(self) -> bool {
        matches!(self, PolicyKind::UniformLeaf | PolicyKind::GreedyLeaf)
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::UniformLeaf => "uniform-leaf",
            PolicyKind::GreedyLeaf => "greedy-leaf",
            PolicyKind::UniformPath => "uniform-path",
            PolicyKind::PathPureExploration => "path-explore",
            PolicyKind::PathGreedy => "path-greedy",
            PolicyKind::PathUct { .. } => "path-uct",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::PathUct { c } if *c != DEFAULT_UCT_C => write!(f, "path-uct:{c}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// Accepts the names printed by `Display`, e.g. `path-uct` or `path-uct:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let policy = match head {
            "uniform-leaf" => PolicyKind::UniformLeaf,
            "greedy-leaf" => PolicyKind::GreedyLeaf,
            "uniform-path" => PolicyKind::UniformPath,
            "path-explore" => PolicyKind::PathPureExploration,
            "path-greedy" => PolicyKind::PathGreedy,
            "path-uct" => {
                let c = match arg {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| Error::Param(format!("bad UCT constant `{a}`")))?,
                    None => DEFAULT_UCT_C,
                };
                if !(c > 0.0) {
                    return Err(Error::Param("UCT constant must be positive".into()));
                }
                return Ok(PolicyKind::PathUct { c });
            }
            other => return Err(Error::Param(format!("unknown policy `{other}`"))),
        };
        if arg.is_some() {
            return Err(Error::Param(format!("policy `{head}` takes no argument")));
        }
        Ok(policy)
    }
}

/// Which children a path walk may descend into.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessorRule {
    /// Skip children whose whole subtree holds no frontier state.
    #[default]
    Pruned,
    /// Every child is eligible, as in textbook MCTS. A walk that reaches a
    /// visited leaf ends there without expanding anything.
    Full,
    /// Skip visited children none of whose immediate children are in the
    /// frontier. Can strand the walk; kept for comparison.
    Literal,
}

/// How greedy leaf sampling breaks ties between equally valued parents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreedyTie {
    /// Uniform over every frontier state whose parent has the top value.
    #[default]
    Pooled,
    /// Uniform over tied parents first, then over that parent's children.
    ParentFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub budget: usize,
    pub policy: PolicyKind,
    #[serde(default)]
    pub rule: SuccessorRule,
    #[serde(default)]
    pub greedy_tie: GreedyTie,
    #[serde(default)]
    pub estimator: ValueEstimator,
}

impl SearchConfig {
    pub fn new(budget: usize, policy: PolicyKind) -> Self {
        Self {
            budget,
            policy,
            rule: SuccessorRule::default(),
            greedy_tie: GreedyTie::default(),
            estimator: ValueEstimator::default(),
        }
    }

    pub fn with_rule(mut self, rule: SuccessorRule) -> Self {
        self.rule = rule;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// All `T` selections were made.
    Budget,
    /// Every state was visited before the budget ran out.
    Exhausted,
    /// A walk ended on a visited state (only under [`SuccessorRule::Full`]).
    Stalled,
}

#[derive(Clone, Debug)]
pub struct SearchRun {
    pub trajectory: Trajectory,
    /// Walk taken at each step, root first; `paths[0]` is just the root.
    pub paths: Vec<Vec<StateId>>,
    pub stop: StopReason,
}

/// Runs one search. Policy choices and value rollouts use separate child
/// streams of `rng`.
pub fn run_search(tree: &dyn TreeEnv, cfg: &SearchConfig, rng: &RngStream) -> Result<SearchRun> {
    if cfg.budget == 0 {
        return Err(Error::Param("budget must be at least 1".into()));
    }
    let mut policy_rng = rng.derive("policy");
    let mut value_rng = rng.derive("value");
    let root = tree.root();
    let v0 = cfg.estimator.observe(tree, root, &mut value_rng);
    let mut state = SearchState::new(tree, v0);
    let mut stop = StopReason::Budget;
    for _ in 0..cfg.budget {
        if state.frontier().is_empty() {
            stop = StopReason::Exhausted;
            break;
        }
        let sel = state.sample(cfg.policy, cfg.rule, cfg.greedy_tie, &mut policy_rng)?;
        if sel.revisit {
            stop = StopReason::Stalled;
            break;
        }
        let v = cfg.estimator.observe(tree, sel.state, &mut value_rng);
        state.visit_with_path(sel.state, v, sel.path)?;
    }
    let paths = state.paths().to_vec();
    Ok(SearchRun {
        trajectory: state.into_trajectory(),
        paths,
        stop,
    })
}

/// Uniform draw from the frontier.
pub fn step_uniform_leaf(state: &SearchState, rng: &mut RngStream) -> Result<StateId> {
    Ok(state.sample(PolicyKind::UniformLeaf, SuccessorRule::Pruned, GreedyTie::Pooled, rng)?.state)
}

/// Frontier state whose parent carries the highest recorded value.
pub fn step_greedy_leaf(state: &SearchState, tie: GreedyTie, rng: &mut RngStream) -> Result<StateId> {
    Ok(state.sample(PolicyKind::GreedyLeaf, SuccessorRule::Pruned, tie, rng)?.state)
}

/// Uniform walk from the root over the eligible children.
pub fn step_uniform_path(state: &SearchState, rule: SuccessorRule, rng: &mut RngStream) -> Result<StateId> {
    Ok(state.sample(PolicyKind::UniformPath, rule, GreedyTie::Pooled, rng)?.state)
}

/// Walk that expands unvisited children first and otherwise follows the
/// traversal score.
pub fn step_policy_path(
    state: &SearchState,
    policy: PolicyKind,
    rule: SuccessorRule,
    rng: &mut RngStream,
) -> Result<Selection> {
    if policy.is_leaf() || policy == PolicyKind::UniformPath {
        return Err(Error::Param(format!("{policy} is not a traversal policy")));
    }
    state.sample(policy, rule, GreedyTie::Pooled, rng)
}
