//! Per-step KL divergence between a reference policy and a candidate.

use std::path::Path;

use serde::Serialize;
use treesearch::metrics::kl_divergence;
use treesearch::search::{next_state_distribution, run_search, DistMode, NextStateDistribution, PolicyKind};
use treesearch::{RngStream, StepRecord, TreeEnv};
use treesearch_hardattn::{model_next_state, HardAttnModel};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Where a next-state distribution comes from.
pub enum DistSource {
    /// A reference policy, exact or estimated from `samples` draws.
    Policy { policy: PolicyKind, samples: Option<usize> },
    Model(Box<HardAttnModel>),
}

impl DistSource {
    fn at(&self, cfg: &ExperimentConfig, tree: &dyn TreeEnv, prefix: &[StepRecord], seed: u64) -> Result<NextStateDistribution> {
        Ok(match self {
            DistSource::Policy { policy, samples } => {
                let mode = match samples {
                    Some(n) => DistMode::Empirical { samples: *n, seed },
                    None => DistMode::Analytic,
                };
                next_state_distribution(tree, prefix, &cfg.search_config(*policy), mode)?
            }
            DistSource::Model(m) => model_next_state(m, prefix, tree)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlRow {
    pub instance: String,
    pub trace: usize,
    /// Selection about to be made (1 = first after the root).
    pub step: usize,
    pub frontier: usize,
    pub kl: f64,
    /// The candidate had less than the floor on a state the reference uses.
    pub smoothed: bool,
}

/// Walks `traces` reference trajectories per test instance and compares
/// `p` against `q` before every selection.
pub fn kl_eval(
    cfg: &ExperimentConfig,
    reference: PolicyKind,
    p: &DistSource,
    q: &DistSource,
    traces: usize,
) -> Result<Vec<KlRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for inst in cfg.test_instances()? {
        let tree = inst.spec.build()?;
        for trace in 0..traces {
            let label = format!("kl/{}/{trace}", inst.id);
            let run = run_search(tree.as_ref(), &cfg.search_config(reference), &RngStream::new(cfg.seed, &*label))?;
            let steps = &run.trajectory.steps;
            for t in 1..steps.len() {
                let prefix = &steps[..t];
                let seed = cfg.seed ^ (t as u64) << 32 ^ trace as u64;
                let pd = p.at(cfg, tree.as_ref(), prefix, seed)?;
                let qd = q.at(cfg, tree.as_ref(), prefix, seed.wrapping_add(1))?;
                let kl = kl_divergence(&pd, &qd)?;
                rows.push(KlRow {
                    instance: inst.id.clone(),
                    trace,
                    step: t,
                    frontier: pd.support.len(),
                    kl: kl.value,
                    smoothed: kl.smoothed,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_kl_csv(path: &Path, rows: &[KlRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
