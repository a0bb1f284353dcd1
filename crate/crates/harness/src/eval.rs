//! Online evaluation on held-out instances.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use treesearch::metrics::{aggregate, l2_metric_distance, score_run, Metric, MetricVector, RunOutcome};
use treesearch::search::{run_search, PolicyKind};
use treesearch::RngStream;
use treesearch_hardattn::{rollout_with_model, HardAttnModel};

use crate::config::{ExperimentConfig, Instance};
use crate::error::{Error, Result};
use crate::protocol::Transport;
use crate::session::serve_agent;

/// Who makes the selections.
pub enum Agent {
    Policy(PolicyKind),
    Model(Box<HardAttnModel>),
    /// An agent on the far side of a protocol stream. Sessions run one
    /// after another on the same stream.
    External {
        name: String,
        transport: Box<dyn Transport>,
    },
}

impl Agent {
    pub fn name(&self) -> String {
        match self {
            Agent::Policy(p) => p.to_string(),
            Agent::Model(m) => format!("model:{:?}", m.kind).to_lowercase(),
            Agent::External { name, .. } => name.clone(),
        }
    }
}

/// One row of the per-run table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub instance: String,
    pub trace: usize,
    pub hit: bool,
    pub hit_iter: Option<usize>,
    pub highest_reward: f64,
    pub cumulative_reward: f64,
    pub norm_path_len: f64,
    pub norm_jump: f64,
    pub selections: usize,
    pub failed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub agent: String,
    pub metrics: MetricVector,
    pub outcomes: Vec<RunOutcome>,
    pub runs: Vec<RunRow>,
}

/// Label of the random stream behind one test run. Value noise is drawn
/// fresh for every run.
pub fn eval_label(instance: &str, trace: usize) -> String {
    format!("eval/{instance}/{trace}")
}

fn row(inst: &Instance, trace: usize, o: &RunOutcome, selections: usize, error: Option<String>) -> RunRow {
    RunRow {
        instance: inst.id.clone(),
        trace,
        hit: o.hit,
        hit_iter: o.hit_iter,
        highest_reward: o.highest_reward(),
        cumulative_reward: o.cumulative_reward(),
        norm_path_len: o.norm_path_len(),
        norm_jump: o.mean_jump(),
        selections,
        failed: o.failed,
        error,
    }
}

type Scored = (RunOutcome, usize, Option<String>);

/// Runs `test_traces` episodes on each of the `n_test_instances` held-out
/// instances. Protocol failures of models and external agents count as
/// misses instead of aborting the batch.
pub fn run_eval(cfg: &ExperimentConfig, agent: &mut Agent) -> Result<EvalReport> {
    cfg.validate()?;
    let instances = cfg.test_instances()?;
    let trees = instances
        .iter()
        .map(|i| i.spec.build())
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..cfg.test_traces).map(move |t| (i, t)))
        .collect();
    let rng_for = |i: usize, t: usize| RngStream::new(cfg.seed, eval_label(&instances[i].id, t));
    let scored: Vec<Scored> = match agent {
        Agent::Policy(p) => {
            let scfg = cfg.search_config(*p);
            jobs.par_iter()
                .map(|&(i, t)| {
                    let tree = trees[i].as_ref();
                    let run = run_search(tree, &scfg, &rng_for(i, t))?;
                    Ok((score_run(&run.trajectory, tree), run.trajectory.num_selections(), None))
                })
                .collect::<Result<_>>()?
        }
        Agent::Model(model) => {
            if cfg.budget > model.budget {
                return Err(Error::Config(format!(
                    "model was built for {} selections, evaluation needs {}",
                    model.budget, cfg.budget
                )));
            }
            let estimator = cfg.search_config(PolicyKind::UniformLeaf).estimator;
            jobs.par_iter()
                .map(|&(i, t)| {
                    let tree = trees[i].as_ref();
                    Ok(match rollout_with_model(model, tree, &estimator, cfg.budget, &rng_for(i, t)) {
                        Ok(run) => (score_run(&run.trajectory, tree), run.trajectory.num_selections(), None),
                        Err(e) => (RunOutcome::failed(tree.truth_path_len()), 0, Some(e.to_string())),
                    })
                })
                .collect::<Result<_>>()?
        }
        Agent::External { transport, .. } => {
            let estimator = cfg.search_config(PolicyKind::UniformLeaf).estimator;
            jobs.iter()
                .map(|&(i, t)| {
                    let tree = trees[i].as_ref();
                    let log = serve_agent(tree, cfg.budget, &estimator, &rng_for(i, t), transport.as_mut());
                    let n = log.trajectory.num_selections();
                    if log.status.is_success() {
                        (score_run(&log.trajectory, tree), n, None)
                    } else {
                        let msg = log.error.unwrap_or_else(|| log.status.as_str().to_string());
                        (RunOutcome::failed(tree.truth_path_len()), n, Some(msg))
                    }
                })
                .collect()
        }
    };
    let runs = jobs
        .iter()
        .zip(&scored)
        .map(|(&(i, t), (o, n, e))| row(&instances[i], t, o, *n, e.clone()))
        .collect();
    let outcomes: Vec<RunOutcome> = scored.into_iter().map(|s| s.0).collect();
    Ok(EvalReport {
        agent: agent.name(),
        metrics: aggregate(&outcomes)?,
        outcomes,
        runs,
    })
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    mean: f64,
    std: f64,
    se95: f64,
}

pub fn write_metrics_csv(path: &Path, m: &MetricVector) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for metric in Metric::ALL {
        let s = m.get(metric);
        w.serialize(MetricRow {
            metric: metric.name(),
            mean: s.mean,
            std: s.std,
            se95: s.se95,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_csv(path: &Path, runs: &[RunRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Pairwise distance matrix over the 12 mean/std components.
pub fn comparison_matrix(reports: &[(String, MetricVector)]) -> Vec<Vec<f64>> {
    reports
        .iter()
        .map(|(_, a)| reports.iter().map(|(_, b)| l2_metric_distance(a, b)).collect())
        .collect()
}

pub fn write_comparison_csv(path: &Path, reports: &[(String, MetricVector)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![String::new()];
    header.extend(reports.iter().map(|r| r.0.clone()));
    w.write_record(&header)?;
    for ((name, _), row) in reports.iter().zip(comparison_matrix(reports)) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|d| d.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
