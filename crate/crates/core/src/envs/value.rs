use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::domain::{StateId, TreeEnv};

/// Exact rollout value: expected leaf reward under uniform random descent.
pub fn true_value(tree: &dyn TreeEnv, s: StateId) -> f64 {
    tree.true_value(s)
}

/// Value in hundredths, rounded half up.
pub fn centi(x: f64) -> i64 {
    (x * 100.0 + 0.5 + 1e-9).floor() as i64
}

pub fn from_centi(c: i64) -> f64 {
    c as f64 / 100.0
}

/// Monte Carlo estimate of a state's value from `rollouts` uniform descents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueEstimator {
    pub rollouts: u32,
}

impl Default for ValueEstimator {
    fn default() -> Self {
        Self { rollouts: 1 }
    }
}

impl ValueEstimator {
    pub fn new(rollouts: u32) -> Self {
        assert!(rollouts >= 1, "at least one rollout");
        Self { rollouts }
    }

    /// Mean leaf reward over independent rollouts.
    pub fn estimate_value(&self, tree: &dyn TreeEnv, s: StateId, rng: &mut dyn RngCore) -> f64 {
        let total: f64 = (0..self.rollouts).map(|_| tree.sample_rollout(s, rng)).sum();
        total / self.rollouts as f64
    }

    /// The value the agent is shown: the estimate snapped to the 0.01 grid.
    pub fn observe(&self, tree: &dyn TreeEnv, s: StateId, rng: &mut dyn RngCore) -> f64 {
        from_centi(centi(self.estimate_value(tree, s, rng)))
    }
}
