//! Test helpers: small trees and brute-force reimplementations of the
//! policies that share no code with the library's bookkeeping.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::Rng;
use treesearch::envs::SearchTree;
use treesearch::search::{GreedyTie, PolicyKind, SuccessorRule};
use treesearch::{RngStream, StateId, StepRecord, Trajectory, TreeEnv};

/// Depth-3 binary tree with breadth-first ids 0..=14 and goals on states 8
/// and 11.
pub fn fig2_tree(r8: f64, r11: f64) -> SearchTree {
    let mut reward = vec![0.0; 15];
    reward[8] = r8;
    reward[11] = r11;
    let children = (0..15)
        .map(|p| if p < 7 { vec![2 * p + 1, 2 * p + 2] } else { vec![] })
        .collect();
    SearchTree::from_children(children, reward).unwrap()
}

/// Random tree with at most `max_states` states, 0..=3 children per state
/// and rewards on a few leaves.
pub fn random_tree(rng: &mut RngStream, max_states: usize) -> SearchTree {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut queue = vec![0usize];
    let mut depth = vec![0usize];
    while let Some(p) = queue.pop() {
        if depth[p] >= 4 {
            continue;
        }
        let k = rng.gen_range(0..=3u32) as usize;
        for _ in 0..k {
            if children.len() >= max_states {
                break;
            }
            let c = children.len();
            children.push(Vec::new());
            depth.push(depth[p] + 1);
            children[p].push(c);
            queue.insert(0, c);
        }
    }
    let n = children.len();
    let reward = (0..n)
        .map(|s| {
            if children[s].is_empty() && s > 0 && rng.gen_bool(0.3) {
                (rng.gen_range(1..=100u32) as f64) / 100.0
            } else {
                0.0
            }
        })
        .collect();
    SearchTree::from_children(children, reward).unwrap()
}

/// Plays `steps` uniformly random frontier picks with random grid values.
pub fn random_prefix(tree: &SearchTree, rng: &mut RngStream, steps: usize) -> Vec<StepRecord> {
    let root = tree.root();
    let mut out = vec![StepRecord {
        state: root,
        value: grid_value(rng),
        children: tree.children(root),
    }];
    let mut frontier: Vec<StateId> = tree.children(root);
    for _ in 0..steps {
        if frontier.is_empty() {
            break;
        }
        let s = frontier.remove(rng.gen_range(0..frontier.len() as u64) as usize);
        frontier.extend(tree.children(s));
        out.push(StepRecord {
            state: s,
            value: grid_value(rng),
            children: tree.children(s),
        });
    }
    out
}

/// Values on a coarse grid so that ties actually occur.
pub fn grid_value(rng: &mut RngStream) -> f64 {
    [0.0, 0.0, 0.1, 0.4, 0.5, 1.0][rng.gen_range(0..6u64) as usize]
}

/// Brute-force view of a prefix: sets recomputed from scratch each time.
pub struct Oracle<'t> {
    pub tree: &'t SearchTree,
    pub visited: Vec<StateId>,
    pub value: HashMap<StateId, f64>,
}

impl<'t> Oracle<'t> {
    pub fn new(tree: &'t SearchTree, prefix: &[StepRecord]) -> Self {
        Self {
            tree,
            visited: prefix.iter().map(|s| s.state).collect(),
            value: prefix.iter().map(|s| (s.state, s.value)).collect(),
        }
    }

    pub fn frontier(&self) -> HashSet<StateId> {
        let visited: HashSet<StateId> = self.visited.iter().copied().collect();
        self.visited
            .iter()
            .flat_map(|&v| self.tree.children(v))
            .filter(|c| !visited.contains(c))
            .collect()
    }

    /// No frontier state anywhere in the subtree of `s`.
    pub fn explored(&self, s: StateId) -> bool {
        let f = self.frontier();
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            if f.contains(&x) {
                return false;
            }
            if self.visited.contains(&x) {
                stack.extend(self.tree.children(x));
            }
        }
        true
    }

    fn is_ancestor_or_self(&self, a: StateId, b: StateId) -> bool {
        let mut cur = Some(b);
        while let Some(x) = cur {
            if x == a {
                return true;
            }
            cur = self.tree.parent(x);
        }
        false
    }

    /// Visits made at or below `s`.
    pub fn count(&self, s: StateId) -> u32 {
        self.visited.iter().filter(|&&v| self.is_ancestor_or_self(s, v)).count() as u32
    }

    /// Sum of values observed at or below `s`.
    pub fn value_sum(&self, s: StateId) -> f64 {
        self.visited
            .iter()
            .filter(|&&v| self.is_ancestor_or_self(s, v))
            .map(|v| self.value[v])
            .sum()
    }

    fn score(&self, policy: PolicyKind, parent: StateId, c: StateId) -> f64 {
        let n = self.count(c) as f64;
        match policy {
            PolicyKind::PathPureExploration => -n,
            PolicyKind::PathGreedy => (self.value_sum(c) * 100.0).round(),
            PolicyKind::PathUct { c: k } => {
                let v = (self.value_sum(c) * 100.0).round() / 100.0;
                v / n + k * ((2.0 * self.count(parent) as f64).ln() / n).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Exact next-state probabilities. Revisit outcomes are keyed by the
    /// visited state and flagged `true`.
    pub fn distribution(
        &self,
        policy: PolicyKind,
        rule: SuccessorRule,
        tie: GreedyTie,
    ) -> HashMap<(StateId, bool), f64> {
        let f = self.frontier();
        let mut out = HashMap::new();
        match policy {
            PolicyKind::UniformLeaf => {
                for &s in &f {
                    out.insert((s, false), 1.0 / f.len() as f64);
                }
            }
            PolicyKind::GreedyLeaf => {
                let pv = |s: &StateId| (self.value[&self.tree.parent(*s).unwrap()] * 100.0).round();
                let best = f.iter().map(pv).fold(f64::MIN, f64::max);
                let tied: Vec<StateId> = f.iter().copied().filter(|s| pv(s) == best).collect();
                match tie {
                    GreedyTie::Pooled => {
                        for &s in &tied {
                            out.insert((s, false), 1.0 / tied.len() as f64);
                        }
                    }
                    GreedyTie::ParentFirst => {
                        let parents: HashSet<StateId> =
                            tied.iter().map(|s| self.tree.parent(*s).unwrap()).collect();
                        for &s in &tied {
                            let p = self.tree.parent(s).unwrap();
                            let sibs = tied.iter().filter(|x| self.tree.parent(**x) == Some(p)).count();
                            out.insert((s, false), 1.0 / parents.len() as f64 / sibs as f64);
                        }
                    }
                }
            }
            _ => self.walk(self.tree.root(), 1.0, policy, rule, &f, &mut out),
        }
        out
    }

    fn walk(
        &self,
        s: StateId,
        p: f64,
        policy: PolicyKind,
        rule: SuccessorRule,
        f: &HashSet<StateId>,
        out: &mut HashMap<(StateId, bool), f64>,
    ) {
        let kids = self.tree.children(s);
        let unvisited: Vec<StateId> = kids.iter().copied().filter(|c| f.contains(c)).collect();
        let opts: Vec<StateId> = if policy != PolicyKind::UniformPath && !unvisited.is_empty() {
            unvisited
        } else {
            let cands: Vec<StateId> = match rule {
                SuccessorRule::Full => kids.clone(),
                _ => kids.iter().copied().filter(|&c| !self.explored(c)).collect(),
            };
            if cands.is_empty() {
                *out.entry((s, true)).or_insert(0.0) += p;
                return;
            }
            if policy == PolicyKind::UniformPath {
                cands
            } else {
                let scores: Vec<f64> = cands.iter().map(|&c| self.score(policy, s, c)).collect();
                let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                cands
                    .into_iter()
                    .zip(scores)
                    .filter(|(_, x)| *x == best)
                    .map(|(c, _)| c)
                    .collect()
            }
        };
        for &o in &opts {
            let q = p / opts.len() as f64;
            if f.contains(&o) {
                *out.entry((o, false)).or_insert(0.0) += q;
            } else {
                self.walk(o, q, policy, rule, f, out);
            }
        }
    }
}

/// Trajectory from a list of frontier indices and values, frontier kept in
/// order of revelation.
pub fn replay(tree: &dyn TreeEnv, picks: &[(usize, f64)]) -> Trajectory {
    let root = tree.root();
    let mut steps = vec![StepRecord {
        state: root,
        value: 0.0,
        children: tree.children(root),
    }];
    let mut frontier = tree.children(root);
    for &(k, v) in picks {
        let s = frontier.remove(k);
        let kids = tree.children(s);
        frontier.extend(kids.iter().copied());
        steps.push(StepRecord {
            state: s,
            value: v,
            children: kids,
        });
    }
    Trajectory::new(steps)
}
