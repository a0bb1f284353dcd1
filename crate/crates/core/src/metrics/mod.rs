//! Per-run scores and batch aggregates.

use serde::{Deserialize, Serialize};

use crate::domain::{StateId, Trajectory, TreeEnv};
use crate::error::{Error, Result};
use crate::search::NextStateDistribution;

/// Floor applied to the reference distribution before taking KL.
pub const KL_FLOOR: f64 = 1e-6;

/// What one run achieved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub hit: bool,
    /// Selection number (1-based) at which the best reward was first seen.
    pub hit_iter: Option<usize>,
    /// Rewards of all visited states, root included.
    pub rewards: Vec<f64>,
    /// Depth of the state that first reached the highest reward found.
    pub found_path_len: Option<usize>,
    pub truth_path_len: usize,
    /// Mean of the two jumps around each interior selection.
    pub jump_distances: Vec<f64>,
    /// Set for runs aborted by a protocol error; scored as a miss.
    #[serde(default)]
    pub failed: bool,
}

impl RunOutcome {
    /// A run that produced nothing usable.
    pub fn failed(truth_path_len: usize) -> Self {
        Self {
            hit: false,
            hit_iter: None,
            rewards: Vec::new(),
            found_path_len: None,
            truth_path_len,
            jump_distances: Vec::new(),
            failed: true,
        }
    }

    pub fn dcg(&self) -> f64 {
        match self.hit_iter {
            Some(i) => 1.0 / ((i + 1) as f64).log2(),
            None => 0.0,
        }
    }

    pub fn norm_path_len(&self) -> f64 {
        match (self.hit, self.found_path_len) {
            (true, Some(l)) => (self.truth_path_len as f64 - l as f64).exp(),
            _ => 0.0,
        }
    }

    pub fn highest_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(0.0, f64::max)
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn mean_jump(&self) -> f64 {
        if self.jump_distances.is_empty() {
            0.0
        } else {
            self.jump_distances.iter().sum::<f64>() / self.jump_distances.len() as f64
        }
    }
}

/// Tree distance through the lowest common ancestor.
pub fn tree_distance(tree: &dyn TreeEnv, a: StateId, b: StateId) -> usize {
    let (mut x, mut y) = (a, b);
    let (mut dx, mut dy) = (tree.depth(x), tree.depth(y));
    let mut dist = 0;
    while dx > dy {
        x = tree.parent(x).expect("depth > 0 has a parent");
        dx -= 1;
        dist += 1;
    }
    while dy > dx {
        y = tree.parent(y).expect("depth > 0 has a parent");
        dy -= 1;
        dist += 1;
    }
    while x != y {
        x = tree.parent(x).expect("distinct states below the root");
        y = tree.parent(y).expect("distinct states below the root");
        dist += 2;
    }
    dist
}

pub fn score_run(t: &Trajectory, tree: &dyn TreeEnv) -> RunOutcome {
    let best = tree.best_reward();
    let rewards: Vec<f64> = t.steps.iter().map(|s| tree.reward(s.state)).collect();
    let hit_iter = rewards.iter().position(|&r| best > 0.0 && r == best);
    let top = rewards.iter().copied().fold(0.0, f64::max);
    let found_path_len = if top > 0.0 {
        rewards
            .iter()
            .position(|&r| r == top)
            .map(|i| tree.depth(t.steps[i].state))
    } else {
        None
    };
    let states = t.states();
    let jumps: Vec<usize> = states
        .windows(2)
        .map(|w| tree_distance(tree, w[0], w[1]))
        .collect();
    let jump_distances = jumps
        .windows(2)
        .map(|w| (w[0] + w[1]) as f64 / 2.0)
        .collect();
    RunOutcome {
        hit: hit_iter.is_some(),
        hit_iter,
        rewards,
        found_path_len,
        truth_path_len: tree.truth_path_len(),
        jump_distances,
        failed: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HitRate,
    Dcg,
    NormPathLen,
    HighestReward,
    CumulativeReward,
    NormJump,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::HitRate,
        Metric::Dcg,
        Metric::NormPathLen,
        Metric::HighestReward,
        Metric::CumulativeReward,
        Metric::NormJump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HitRate => "hit_rate",
            Metric::Dcg => "dcg",
            Metric::NormPathLen => "norm_path_len",
            Metric::HighestReward => "highest_reward",
            Metric::CumulativeReward => "cumulative_reward",
            Metric::NormJump => "norm_jump",
        }
    }

    pub fn of(self, o: &RunOutcome) -> f64 {
        match self {
            Metric::HitRate => {
                if o.hit {
                    1.0
                } else {
                    0.0
                }
            }
            Metric::Dcg => o.dcg(),
            Metric::NormPathLen => o.norm_path_len(),
            Metric::HighestReward => o.highest_reward(),
            Metric::CumulativeReward => o.cumulative_reward(),
            Metric::NormJump => o.mean_jump(),
        }
    }
}

/// Mean, population standard deviation and the 1.96 standard-error half width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub se95: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            std,
            se95: 1.96 * std / n.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub n: usize,
    pub stats: Vec<(Metric, Stat)>,
}

impl MetricVector {
    pub fn get(&self, m: Metric) -> Stat {
        self.stats
            .iter()
            .find(|s| s.0 == m)
            .map(|s| s.1)
            .expect("every metric is present")
    }

    /// Means and standard deviations, interleaved, in [`Metric::ALL`] order.
    pub fn components(&self) -> Vec<f64> {
        Metric::ALL
            .iter()
            .flat_map(|&m| {
                let s = self.get(m);
                [s.mean, s.std]
            })
            .collect()
    }
}

pub fn aggregate(outcomes: &[RunOutcome]) -> Result<MetricVector> {
    if outcomes.is_empty() {
        return Err(Error::Param("cannot aggregate zero runs".into()));
    }
    let stats = Metric::ALL
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = outcomes.iter().map(|o| m.of(o)).collect();
            (m, Stat::of(&xs))
        })
        .collect();
    Ok(MetricVector {
        n: outcomes.len(),
        stats,
    })
}

/// Euclidean distance between the 12 mean/std components.
pub fn l2_metric_distance(a: &MetricVector, b: &MetricVector) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kl {
    pub value: f64,
    /// True when some state with `p > 0` had `q` below the floor.
    pub smoothed: bool,
}

fn atoms(d: &NextStateDistribution) -> Vec<f64> {
    let mut v = d.probs.clone();
    v.extend(d.revisits.iter().map(|r| r.1));
    v
}

/// `sum p log(p/q)` over states with `p > 0`. Entries of `q` below
/// [`KL_FLOOR`] are raised to it and `q` is renormalized.
pub fn kl_divergence(p: &NextStateDistribution, q: &NextStateDistribution) -> Result<Kl> {
    if p.support != q.support {
        return Err(Error::Structure("KL between distributions over different frontiers".into()));
    }
    let revisit_keys = |d: &NextStateDistribution| d.revisits.iter().map(|r| r.0).collect::<Vec<_>>();
    if revisit_keys(p) != revisit_keys(q) && !(p.revisits.is_empty() && q.revisits.is_empty()) {
        let mut pp = p.clone();
        let mut qq = q.clone();
        for d in [&mut pp, &mut qq] {
            for &(s, _) in p.revisits.iter().chain(&q.revisits) {
                if !d.revisits.iter().any(|r| r.0 == s) {
                    d.revisits.push((s, 0.0));
                }
            }
            d.revisits.sort_by_key(|r| r.0);
        }
        return kl_divergence(&pp, &qq);
    }
    let pv = atoms(p);
    let mut qv = atoms(q);
    let smoothed = pv.iter().zip(&qv).any(|(&a, &b)| a > 0.0 && b < KL_FLOOR);
    if qv.iter().any(|&b| b < KL_FLOOR) {
        for b in qv.iter_mut() {
            *b = b.max(KL_FLOOR);
        }
        let z: f64 = qv.iter().sum();
        for b in qv.iter_mut() {
            *b /= z;
        }
    }
    let value = pv
        .iter()
        .zip(&qv)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum();
    Ok(Kl { value, smoothed })
}
