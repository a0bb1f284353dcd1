//! Problem families and the bandit value estimator.

mod nav;
mod tree;
mod value;

pub use nav::{cell_name, generate_nav, Cell, NavLayout, NavSpec, NavTree, MAX_LAYOUT_ATTEMPTS};
pub use tree::{default_goal_rewards, generate_tree, SearchTree, TreeSpec, DEFAULT_GOAL_REWARDS};
pub use value::{centi, from_centi, true_value, ValueEstimator};

use crate::error::{Error, Result};

/// Goal rewards must be positive, at most 1 and strictly decreasing.
pub(crate) fn check_goal_rewards(rewards: &[f64]) -> Result<()> {
    if rewards.is_empty() {
        return Err(Error::Param("at least one goal reward is required".into()));
    }
    for w in rewards.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Param("goal rewards must be strictly decreasing".into()));
        }
    }
    if rewards.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::Param("goal rewards must lie in (0, 1]".into()));
    }
    Ok(())
}
