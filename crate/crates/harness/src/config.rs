//! Experiment configuration and problem instances.

use std::path::Path;

use serde::{Deserialize, Serialize};
use treesearch::envs::{generate_nav, generate_tree, NavSpec, TreeSpec};
use treesearch::search::{PolicyKind, SearchConfig, SuccessorRule};
use treesearch::tracecodec::Vocab;
use treesearch::{Family, RngStream, TreeEnv};

use crate::error::{Error, Result};

/// Family parameters shared by every instance of an experiment. Seeds are
/// filled in per instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    Tree {
        branching: usize,
        depth: usize,
        num_goals: usize,
    },
    Nav {
        width: usize,
        height: usize,
        wall_density: f64,
        num_goals: usize,
        max_path_len: usize,
    },
}

impl EnvConfig {
    pub fn family(&self) -> Family {
        match self {
            EnvConfig::Tree { .. } => Family::Tree,
            EnvConfig::Nav { .. } => Family::Nav,
        }
    }

    pub fn spec(&self, seed: u64) -> Result<InstanceSpec> {
        Ok(match *self {
            EnvConfig::Tree {
                branching,
                depth,
                num_goals,
            } => InstanceSpec::Tree(TreeSpec::new(branching, depth, num_goals, seed)?),
            EnvConfig::Nav {
                width,
                height,
                wall_density,
                num_goals,
                max_path_len,
            } => InstanceSpec::Nav(NavSpec::new(width, height, wall_density, num_goals, max_path_len, seed)?),
        })
    }

    fn max_children(&self) -> usize {
        match self {
            EnvConfig::Tree { branching, .. } => *branching,
            EnvConfig::Nav { .. } => 4,
        }
    }

    /// Largest frontier `budget` selections can produce.
    pub fn max_frontier(&self, budget: usize) -> usize {
        let b = self.max_children();
        b + budget.saturating_sub(1) * (b - 1)
    }

    /// Token vocabulary of the empirical format for this family.
    pub fn vocab(&self, budget: usize) -> Vocab {
        let max_index = self.max_frontier(budget);
        match *self {
            EnvConfig::Tree {
                branching, depth, ..
            } => Vocab::empirical_tree(branching, depth, max_index),
            EnvConfig::Nav { width, height, .. } => Vocab::empirical_nav(width, height, max_index),
        }
    }
}

/// Seeded specification of one problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InstanceSpec {
    Tree(TreeSpec),
    Nav(NavSpec),
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Box<dyn TreeEnv>> {
        Ok(match self {
            InstanceSpec::Tree(s) => Box::new(generate_tree(s)?),
            InstanceSpec::Nav(s) => Box::new(generate_nav(s)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub split: Split,
    pub spec: InstanceSpec,
}

mod policy_names {
    use serde::{Deserialize, Deserializer, Serializer};
    use treesearch::search::PolicyKind;

    pub fn serialize<S: Serializer>(v: &[PolicyKind], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|p| p.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PolicyKind>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Everything needed to regenerate an experiment. Field defaults follow
/// the usual setup: 200 training instances with 100 traces each, 70% of
/// the instances for training and 30% for validation, and 10 held-out test
/// instances with 100 runs each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(with = "policy_names")]
    pub policies: Vec<PolicyKind>,
    pub budget: usize,
    pub rule: SuccessorRule,
    /// Rollouts averaged into each observed value.
    pub rollouts: u32,
    pub n_train_instances: usize,
    pub traces_per_instance: usize,
    pub train_fraction: f64,
    pub n_test_instances: usize,
    pub test_traces: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::Tree {
                branching: 2,
                depth: 6,
                num_goals: 8,
            },
            policies: vec![PolicyKind::UniformLeaf],
            budget: 50,
            rule: SuccessorRule::Pruned,
            rollouts: 1,
            n_train_instances: 200,
            traces_per_instance: 100,
            train_fraction: 0.7,
            n_test_instances: 10,
            test_traces: 100,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.rollouts == 0 {
            return Err(Error::Config("at least one rollout per value".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies listed".into()));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if self.policies[..i].contains(p) {
                return Err(Error::Config(format!("policy {p} listed twice")));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1]".into()));
        }
        if self.rule == SuccessorRule::Literal {
            return Err(Error::Config("the literal successor rule can strand walks".into()));
        }
        self.env.spec(0)?;
        Ok(())
    }

    pub fn search_config(&self, policy: PolicyKind) -> SearchConfig {
        let mut c = SearchConfig::new(self.budget, policy).with_rule(self.rule);
        c.estimator.rollouts = self.rollouts;
        c
    }

    /// Number of pool instances used for training; the rest validate.
    pub fn n_train_split(&self) -> usize {
        let n = (self.n_train_instances as f64 * self.train_fraction).round() as usize;
        n.min(self.n_train_instances)
    }

    fn instance(&self, id: String, split: Split) -> Result<Instance> {
        let seed = {
            use rand::RngCore;
            RngStream::new(self.seed, format!("instance/{id}")).next_u64()
        };
        Ok(Instance {
            spec: self.env.spec(seed)?,
            id,
            split,
        })
    }

    /// Training and validation instances, in id order.
    pub fn pool_instances(&self) -> Result<Vec<Instance>> {
        let cut = self.n_train_split();
        (0..self.n_train_instances)
            .map(|i| {
                let split = if i < cut { Split::Train } else { Split::Val };
                self.instance(format!("pool-{i:04}"), split)
            })
            .collect()
    }

    pub fn test_instances(&self) -> Result<Vec<Instance>> {
        (0..self.n_test_instances)
            .map(|i| self.instance(format!("test-{i:04}"), Split::Test))
            .collect()
    }
}

/// Every instance of the experiment. Each one is generated once so that
/// infeasible specs fail here rather than halfway through a corpus.
pub fn gen_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let mut all = cfg.pool_instances()?;
    all.extend(cfg.test_instances()?);
    for inst in &all {
        inst.spec.build()?;
    }
    Ok(all)
}
