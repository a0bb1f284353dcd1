//! Generalization sweeps over one configuration axis.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use treesearch::metrics::{Metric, MetricVector};

use crate::config::{EnvConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::eval::{run_eval, Agent};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Budget,
    Depth,
    Goals,
    WallDensity,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Budget => "budget",
            Axis::Depth => "depth",
            Axis::Goals => "goals",
            Axis::WallDensity => "wall-density",
        }
    }

    fn current(self, cfg: &ExperimentConfig) -> Result<f64> {
        Ok(match (self, &cfg.env) {
            (Axis::Budget, _) => cfg.budget as f64,
            (Axis::Depth, EnvConfig::Tree { depth, .. }) => *depth as f64,
            (Axis::Goals, EnvConfig::Tree { num_goals, .. } | EnvConfig::Nav { num_goals, .. }) => *num_goals as f64,
            (Axis::WallDensity, EnvConfig::Nav { wall_density, .. }) => *wall_density,
            (axis, env) => {
                return Err(Error::Config(format!(
                    "axis {axis} does not apply to {} instances",
                    env.family().as_str()
                )))
            }
        })
    }

    /// A copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        self.current(cfg)?;
        let count = || -> Result<usize> {
            if value < 0.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("{self} takes whole numbers, got {value}")));
            }
            Ok(value as usize)
        };
        let mut out = cfg.clone();
        match (self, &mut out.env) {
            (Axis::Budget, _) => out.budget = count()?,
            (Axis::Depth, EnvConfig::Tree { depth, .. }) => *depth = count()?,
            (Axis::Goals, EnvConfig::Tree { num_goals, .. } | EnvConfig::Nav { num_goals, .. }) => *num_goals = count()?,
            (Axis::WallDensity, EnvConfig::Nav { wall_density, .. }) => *wall_density = value,
            _ => unreachable!("checked by current()"),
        }
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "budget" | "T" => Axis::Budget,
            "depth" | "D" => Axis::Depth,
            "goals" | "K" => Axis::Goals,
            "wall-density" | "density" => Axis::WallDensity,
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    /// Set when the value lies outside what a trained agent saw: budgets
    /// above the training budget, any other value that differs from it.
    pub outside_training: bool,
    pub metrics: MetricVector,
}

/// Evaluates `agent` once per value, everything else held at `cfg`.
pub fn sweep(cfg: &ExperimentConfig, axis: Axis, values: &[f64], agent: &mut Agent) -> Result<Vec<SweepRow>> {
    let base = axis.current(cfg)?;
    values
        .iter()
        .map(|&value| {
            let c = axis.apply(cfg, value)?;
            let report = run_eval(&c, agent)?;
            Ok(SweepRow {
                axis,
                value,
                outside_training: match axis {
                    Axis::Budget => value > base,
                    _ => value != base,
                },
                metrics: report.metrics,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["axis".to_string(), "value".into(), "outside_training".into()];
    for m in Metric::ALL {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
        header.push(format!("{}_se95", m.name()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.axis.to_string(), r.value.to_string(), r.outside_training.to_string()];
        for m in Metric::ALL {
            let s = r.metrics.get(m);
            rec.extend([s.mean.to_string(), s.std.to_string(), s.se95.to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
