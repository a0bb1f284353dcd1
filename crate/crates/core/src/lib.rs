//! Search over hidden trees with bandit feedback.
//!
//! An agent starts at the root of a tree it cannot see. Each step it picks
//! one state from the frontier (revealed but unvisited children), receives a
//! noisy value estimate for it, and learns its children. This crate provides
//! the environments, six reference policies, the trace formats used to
//! serialize trajectories, and the metrics used to compare policies.
//!
//! - [`domain`]: states, trajectories, frontier bookkeeping.
//! - [`envs`]: multi-goal B-ary trees and grid navigation.
//! - [`search`]: leaf and path sampling policies.
//! - [`tracecodec`]: token formats for traces.
//! - [`metrics`]: hit rate, DCG, path length, rewards, jump distance, KL.

pub mod domain;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod search;
pub mod tracecodec;

pub use domain::{
    best_reward, frontier_after, is_fully_explored, modified_successors, Family, Frontier,
    StateId, StepRecord, Trajectory, TreeEnv,
};
pub use error::{Error, Result};
pub use rng::RngStream;
