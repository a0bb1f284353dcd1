use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::StateId;
use crate::envs::{centi, from_centi};

use super::PolicyKind;

/// Visit counts and backed-up value sums for revealed states. Sums are kept
/// in hundredths so ties between equal sums are exact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    count: HashMap<StateId, u32>,
    value: HashMap<StateId, i64>,
}

impl TreeStats {
    pub fn count(&self, s: StateId) -> u32 {
        self.count.get(&s).copied().unwrap_or(0)
    }

    /// Backed-up value sum in hundredths.
    pub fn value_centi(&self, s: StateId) -> i64 {
        self.value.get(&s).copied().unwrap_or(0)
    }

    pub fn value(&self, s: StateId) -> f64 {
        from_centi(self.value_centi(s))
    }

    /// Adds one visit and `observed` to every state on `path`.
    pub fn backpropagate(&mut self, path: &[StateId], observed: f64) {
        let c = centi(observed);
        for &s in path {
            *self.count.entry(s).or_insert(0) += 1;
            *self.value.entry(s).or_insert(0) += c;
        }
    }
}

/// Functional form of [`TreeStats::backpropagate`].
pub fn backpropagate(mut stats: TreeStats, path: &[StateId], observed: f64) -> TreeStats {
    stats.backpropagate(path, observed);
    stats
}

/// `value / count + c * sqrt(ln(2 * parent_count) / count)`, with the value
/// sum given in hundredths. Unvisited children score `+inf`.
pub fn uct_score(value_centi: i64, count: u32, parent_count: u32, c: f64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    let n = count as f64;
    from_centi(value_centi) / n + c * ((2.0 * parent_count as f64).ln() / n).sqrt()
}

/// Score of descending from `parent` into `child`; the walk takes an argmax.
/// Leaf policies and uniform path sampling have no traversal score and get 0.
pub fn traversal_score(policy: PolicyKind, stats: &TreeStats, parent: StateId, child: StateId) -> f64 {
    match policy {
        PolicyKind::PathPureExploration => -(stats.count(child) as f64),
        PolicyKind::PathGreedy => stats.value(child),
        PolicyKind::PathUct { c } => {
            uct_score(stats.value_centi(child), stats.count(child), stats.count(parent), c)
        }
        _ => 0.0,
    }
}
