use std::collections::HashMap;

use crate::domain::{Frontier, StateId, StepRecord, Trajectory, TreeEnv};
use crate::envs::centi;
use crate::error::{Error, Result};
use crate::rng::pick;

use super::{traversal_score, GreedyTie, PolicyKind, SuccessorRule, TreeStats};

/// Outcome of one policy step: the state reached and the walk that led
/// there. `revisit` marks a walk that ended on an already visited state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub state: StateId,
    pub path: Vec<StateId>,
    pub revisit: bool,
}

/// What a walk does at a visited node.
pub(crate) enum NodeStep {
    /// Nothing eligible below; the walk ends here.
    Stall,
    /// Continue uniformly into one of these.
    Choose(Vec<StateId>),
}

/// Everything the agent knows after a trajectory prefix: the frontier,
/// visited structure, statistics, and how many frontier states sit below
/// each revealed state.
#[derive(Clone)]
pub struct SearchState<'a> {
    tree: &'a dyn TreeEnv,
    steps: Vec<StepRecord>,
    paths: Vec<Vec<StateId>>,
    frontier: Frontier,
    stats: TreeStats,
    parent: HashMap<StateId, StateId>,
    kids: HashMap<StateId, Vec<StateId>>,
    observed: HashMap<StateId, i64>,
    open_below: HashMap<StateId, u32>,
}

impl<'a> SearchState<'a> {
    fn empty(tree: &'a dyn TreeEnv) -> Self {
        Self {
            tree,
            steps: Vec::new(),
            paths: Vec::new(),
            frontier: Frontier::default(),
            stats: TreeStats::default(),
            parent: HashMap::new(),
            kids: HashMap::new(),
            observed: HashMap::new(),
            open_below: HashMap::new(),
        }
    }

    /// State after visiting the root with value `v0`.
    pub fn new(tree: &'a dyn TreeEnv, v0: f64) -> Self {
        let root = tree.root();
        let mut st = Self::empty(tree);
        st.record(root, v0, tree.children(root), vec![root]);
        st
    }

    /// Replays a recorded prefix. Child lists are taken from the record.
    pub fn from_prefix(tree: &'a dyn TreeEnv, steps: &[StepRecord]) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::Structure("empty prefix".into()))?;
        if first.state != tree.root() {
            return Err(Error::Structure("prefix does not start at the root".into()));
        }
        let mut st = Self::empty(tree);
        for (i, step) in steps.iter().enumerate() {
            if i > 0 && !st.frontier.contains(step.state) {
                return Err(Error::Structure(format!(
                    "step {i}: {} was not in the frontier",
                    step.state
                )));
            }
            if step.children.iter().any(|c| st.parent.contains_key(c) || *c == first.state) {
                return Err(Error::Structure(format!("step {i}: a child was revealed twice")));
            }
            let path = st.path_to(step.state);
            st.record(step.state, step.value, step.children.clone(), path);
        }
        Ok(st)
    }

    fn record(&mut self, s: StateId, value: f64, children: Vec<StateId>, path: Vec<StateId>) {
        if self.frontier.remove(s) {
            self.shift_open(s, -1);
        }
        for &c in &children {
            self.parent.insert(c, s);
            self.frontier.push(c, s);
            self.open_below.insert(c, 0);
            self.shift_open(c, 1);
        }
        self.stats.backpropagate(&path, value);
        self.observed.insert(s, centi(value));
        self.kids.insert(s, children.clone());
        self.steps.push(StepRecord {
            state: s,
            value,
            children,
        });
        self.paths.push(path);
    }

    // Adds `delta` to the open-state count of `s` and all its ancestors.
    fn shift_open(&mut self, s: StateId, delta: i32) {
        let mut cur = Some(s);
        while let Some(x) = cur {
            let e = self.open_below.entry(x).or_insert(0);
            *e = (*e as i32 + delta) as u32;
            cur = self.parent.get(&x).copied();
        }
    }

    /// Visits a frontier state, revealing its children from the environment.
    pub fn visit(&mut self, s: StateId, value: f64) -> Result<()> {
        let path = self.path_to(s);
        self.visit_with_path(s, value, path)
    }

    pub(crate) fn visit_with_path(&mut self, s: StateId, value: f64, path: Vec<StateId>) -> Result<()> {
        if !self.frontier.contains(s) {
            return Err(Error::Structure(format!("{s} is not in the frontier")));
        }
        let children = self.tree.children(s);
        self.record(s, value, children, path);
        Ok(())
    }

    pub fn tree(&self) -> &'a dyn TreeEnv {
        self.tree
    }

    pub fn root(&self) -> StateId {
        self.tree.root()
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }

    pub fn stats(&self) -> &TreeStats {
        &self.stats
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn paths(&self) -> &[Vec<StateId>] {
        &self.paths
    }

    pub fn into_trajectory(self) -> Trajectory {
        Trajectory::new(self.steps)
    }

    pub fn is_visited(&self, s: StateId) -> bool {
        self.kids.contains_key(&s)
    }

    /// Children of a visited state.
    pub fn known_children(&self, s: StateId) -> Option<&[StateId]> {
        self.kids.get(&s).map(|k| k.as_slice())
    }

    /// Recorded value of a visited state, in hundredths.
    pub fn observed_centi(&self, s: StateId) -> Option<i64> {
        self.observed.get(&s).copied()
    }

    /// Frontier states in the subtree of `s`, including `s` itself.
    pub fn open_below(&self, s: StateId) -> u32 {
        self.open_below.get(&s).copied().unwrap_or(0)
    }

    pub fn is_fully_explored(&self, s: StateId) -> bool {
        self.open_below(s) == 0
    }

    /// Root-to-`s` chain through revealed states.
    pub fn path_to(&self, s: StateId) -> Vec<StateId> {
        let mut path = vec![s];
        let mut cur = s;
        while let Some(&p) = self.parent.get(&cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    fn eligible(&self, s: StateId, rule: SuccessorRule) -> Vec<StateId> {
        let kids = self.kids.get(&s).map(|k| k.as_slice()).unwrap_or(&[]);
        match rule {
            SuccessorRule::Full => kids.to_vec(),
            SuccessorRule::Pruned => kids
                .iter()
                .copied()
                .filter(|&c| !self.is_fully_explored(c))
                .collect(),
            SuccessorRule::Literal => kids
                .iter()
                .copied()
                .filter(|&c| {
                    self.frontier.contains(c)
                        || self
                            .kids
                            .get(&c)
                            .is_some_and(|g| g.iter().any(|&x| self.frontier.contains(x)))
                })
                .collect(),
        }
    }

    /// Choice set of a path walk standing on the visited state `s`.
    pub(crate) fn node_step(&self, s: StateId, policy: PolicyKind, rule: SuccessorRule) -> Result<NodeStep> {
        if policy != PolicyKind::UniformPath {
            let unvisited: Vec<StateId> = self
                .kids
                .get(&s)
                .map(|k| k.iter().copied().filter(|&c| self.frontier.contains(c)).collect())
                .unwrap_or_default();
            if !unvisited.is_empty() {
                return Ok(NodeStep::Choose(unvisited));
            }
        }
        let cands = self.eligible(s, rule);
        if cands.is_empty() {
            return match rule {
                SuccessorRule::Full => Ok(NodeStep::Stall),
                SuccessorRule::Pruned => Err(Error::Invariant(format!(
                    "walk reached {s} with nothing eligible below"
                ))),
                SuccessorRule::Literal => Err(Error::Invariant(format!(
                    "one-level exclusion stranded the walk at {s}"
                ))),
            };
        }
        if policy == PolicyKind::UniformPath {
            return Ok(NodeStep::Choose(cands));
        }
        let scores: Vec<f64> = cands
            .iter()
            .map(|&c| traversal_score(policy, &self.stats, s, c))
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(NodeStep::Choose(
            cands
                .into_iter()
                .zip(scores)
                .filter(|&(_, sc)| sc == best)
                .map(|(c, _)| c)
                .collect(),
        ))
    }

    /// Frontier states a leaf policy picks between, grouped into uniform
    /// stages: the outer list is chosen uniformly, then a member of it.
    pub(crate) fn leaf_groups(&self, policy: PolicyKind, tie: GreedyTie) -> Vec<Vec<StateId>> {
        let members = self.frontier.members();
        match policy {
            PolicyKind::GreedyLeaf => {
                let pval = |m: StateId| {
                    let p = self.frontier.parent_of(m).expect("frontier member has a parent");
                    self.observed[&p]
                };
                let best = members.iter().map(|&m| pval(m)).max().unwrap_or(0);
                let tied: Vec<StateId> = members.iter().copied().filter(|&m| pval(m) == best).collect();
                match tie {
                    GreedyTie::Pooled => vec![tied],
                    GreedyTie::ParentFirst => {
                        let mut groups: Vec<(StateId, Vec<StateId>)> = Vec::new();
                        for m in tied {
                            let p = self.frontier.parent_of(m).unwrap();
                            match groups.iter_mut().find(|g| g.0 == p) {
                                Some(g) => g.1.push(m),
                                None => groups.push((p, vec![m])),
                            }
                        }
                        groups.into_iter().map(|g| g.1).collect()
                    }
                }
            }
            _ => vec![members.to_vec()],
        }
    }

    /// Draws the next selection.
    pub fn sample(
        &self,
        policy: PolicyKind,
        rule: SuccessorRule,
        tie: GreedyTie,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Selection> {
        if self.frontier.is_empty() {
            return Err(Error::Exhausted);
        }
        if policy.is_leaf() {
            let groups = self.leaf_groups(policy, tie);
            let g = &groups[pick(rng, groups.len())];
            let s = g[pick(rng, g.len())];
            return Ok(Selection {
                state: s,
                path: self.path_to(s),
                revisit: false,
            });
        }
        let mut cur = self.root();
        let mut path = vec![cur];
        loop {
            match self.node_step(cur, policy, rule)? {
                NodeStep::Stall => {
                    return Ok(Selection {
                        state: cur,
                        path,
                        revisit: true,
                    })
                }
                NodeStep::Choose(opts) => {
                    cur = opts[pick(rng, opts.len())];
                    path.push(cur);
                    if self.frontier.contains(cur) {
                        return Ok(Selection {
                            state: cur,
                            path,
                            revisit: false,
                        });
                    }
                }
            }
        }
    }
}
