use crate::domain::{StateId, StepRecord, TreeEnv};
use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::state::NodeStep;
use super::{SearchConfig, SearchState};

/// Probability of each frontier state being selected next, listed in
/// frontier order (zero entries included). Walks that end on a visited
/// state are kept apart in `revisits`.
#[derive(Clone, Debug, PartialEq)]
pub struct NextStateDistribution {
    pub support: Vec<StateId>,
    pub probs: Vec<f64>,
    pub revisits: Vec<(StateId, f64)>,
}

impl NextStateDistribution {
    fn over(support: Vec<StateId>) -> Self {
        let probs = vec![0.0; support.len()];
        Self {
            support,
            probs,
            revisits: Vec::new(),
        }
    }

    fn add(&mut self, s: StateId, p: f64) {
        let i = self
            .support
            .iter()
            .position(|&x| x == s)
            .expect("selection inside the frontier");
        self.probs[i] += p;
    }

    fn add_revisit(&mut self, s: StateId, p: f64) {
        match self.revisits.iter_mut().find(|r| r.0 == s) {
            Some(r) => r.1 += p,
            None => self.revisits.push((s, p)),
        }
    }

    pub fn prob(&self, s: StateId) -> f64 {
        self.support
            .iter()
            .position(|&x| x == s)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn revisit_mass(&self) -> f64 {
        self.revisits.iter().map(|r| r.1).sum()
    }

    /// States with positive probability, in frontier order.
    pub fn positive(&self) -> Vec<(StateId, f64)> {
        self.support
            .iter()
            .copied()
            .zip(self.probs.iter().copied())
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    /// Half the L1 distance, counting revisit outcomes as their own atoms.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        if self.support != other.support {
            return Err(Error::Structure("distributions over different frontiers".into()));
        }
        let mut l1: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let mut seen: Vec<StateId> = Vec::new();
        for &(s, _) in self.revisits.iter().chain(&other.revisits) {
            if seen.contains(&s) {
                continue;
            }
            seen.push(s);
            let q = |d: &Self| d.revisits.iter().find(|r| r.0 == s).map_or(0.0, |r| r.1);
            l1 += (q(self) - q(other)).abs();
        }
        Ok(l1 / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistMode {
    /// Exact enumeration of every tie-break.
    Analytic,
    /// Frequencies of `samples` independent draws.
    Empirical { samples: usize, seed: u64 },
}

impl<'a> SearchState<'a> {
    pub fn distribution(&self, cfg: &SearchConfig, mode: DistMode) -> Result<NextStateDistribution> {
        if self.frontier().is_empty() {
            return Err(Error::Exhausted);
        }
        let mut out = NextStateDistribution::over(self.frontier().members().to_vec());
        match mode {
            DistMode::Empirical { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Unsupported("empirical distribution with zero samples".into()));
                }
                let base = RngStream::new(seed, "next-state");
                let w = 1.0 / samples as f64;
                for i in 0..samples {
                    let mut rng = base.derive_index("sample", i as u64);
                    let sel = self.sample(cfg.policy, cfg.rule, cfg.greedy_tie, &mut rng)?;
                    if sel.revisit {
                        out.add_revisit(sel.state, w);
                    } else {
                        out.add(sel.state, w);
                    }
                }
            }
            DistMode::Analytic if cfg.policy.is_leaf() => {
                let groups = self.leaf_groups(cfg.policy, cfg.greedy_tie);
                let pg = 1.0 / groups.len() as f64;
                for g in &groups {
                    let p = pg / g.len() as f64;
                    for &s in g {
                        out.add(s, p);
                    }
                }
            }
            DistMode::Analytic => self.enumerate_walk(self.root(), 1.0, cfg, &mut out)?,
        }
        Ok(out)
    }

    fn enumerate_walk(
        &self,
        s: StateId,
        p: f64,
        cfg: &SearchConfig,
        out: &mut NextStateDistribution,
    ) -> Result<()> {
        match self.node_step(s, cfg.policy, cfg.rule)? {
            NodeStep::Stall => out.add_revisit(s, p),
            NodeStep::Choose(opts) => {
                let q = p / opts.len() as f64;
                for o in opts {
                    if self.frontier().contains(o) {
                        out.add(o, q);
                    } else {
                        self.enumerate_walk(o, q, cfg, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Next-state distribution of a policy after a recorded trajectory prefix.
pub fn next_state_distribution(
    tree: &dyn TreeEnv,
    prefix: &[StepRecord],
    cfg: &SearchConfig,
    mode: DistMode,
) -> Result<NextStateDistribution> {
    SearchState::from_prefix(tree, prefix)?.distribution(cfg, mode)
}
