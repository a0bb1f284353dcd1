//! Experiment harness for tree search agents.
//!
//! Generates problem instances and behavior-cloning corpora, evaluates
//! reference policies, constructed attention models and external agents on
//! held-out instances, sweeps configuration axes, and speaks a small line
//! protocol so that agents can run in another process.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod kl;
pub mod protocol;
pub mod session;
pub mod sweep;

pub use config::{gen_instances, EnvConfig, ExperimentConfig, Instance, InstanceSpec, Split};
pub use corpus::{gen_corpus, CorpusManifest};
pub use error::{Error, Result};
pub use eval::{run_eval, Agent, EvalReport};
pub use protocol::{ProtocolMessage, Transport};
pub use session::{run_agent, serve_agent, SessionLog};
pub use sweep::{sweep, Axis};
