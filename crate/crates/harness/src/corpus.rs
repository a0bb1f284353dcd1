//! Behavior-cloning corpora in the empirical trace format.
//!
//! One text file per (policy, split). Records are rendered traces separated
//! by a blank line. A JSON manifest next to them lists every record with
//! its instance, trace number, policy and split, the vocabulary, and a
//! SHA-256 checksum per file.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use treesearch::search::{run_search, PolicyKind};
use treesearch::tracecodec::{encode_empirical, TraceFormat, Vocab};
use treesearch::RngStream;

use crate::config::{ExperimentConfig, Instance, Split};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub policy: String,
    pub split: Split,
    pub records: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    /// Index into `files`.
    pub file: usize,
    /// Position of the record inside its file.
    pub index: usize,
    pub instance: String,
    pub trace: usize,
    pub policy: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: TraceFormat,
    pub config: ExperimentConfig,
    pub instances: Vec<Instance>,
    pub files: Vec<CorpusFile>,
    pub records: Vec<RecordEntry>,
    pub vocab: Vocab,
}

impl CorpusManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
        let mut m: Self = serde_json::from_str(&text)?;
        m.vocab = m.vocab.reindex();
        Ok(m)
    }

    /// Recomputes every file checksum and record count.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let text = fs::read_to_string(dir.join(&f.path))?;
            if sha256_hex(text.as_bytes()) != f.sha256 {
                return Err(Error::Format(format!("checksum mismatch for {}", f.path)));
            }
            if split_records(&text).len() != f.records {
                return Err(Error::Format(format!("record count mismatch for {}", f.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits corpus text at blank lines.
pub fn split_records(text: &str) -> Vec<&str> {
    text.split("\n\n")
        .map(|r| r.trim_end_matches('\n'))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Label of the random stream behind one corpus trace.
pub fn trace_label(instance: &str, policy: PolicyKind, trace: usize) -> String {
    format!("trace/{instance}/{policy}/{trace}")
}

fn instance_records(cfg: &ExperimentConfig, inst: &Instance, policy: PolicyKind) -> Result<Vec<String>> {
    let tree = inst.spec.build()?;
    let scfg = cfg.search_config(policy);
    (0..cfg.traces_per_instance)
        .map(|t| {
            let rng = RngStream::new(cfg.seed, trace_label(&inst.id, policy, t));
            let run = run_search(tree.as_ref(), &scfg, &rng)?;
            Ok(encode_empirical(&run.trajectory, tree.as_ref())?.render())
        })
        .collect()
}

/// Runs every listed policy on the training and validation instances and
/// writes the corpus files and manifest into `dir`.
pub fn gen_corpus(cfg: &ExperimentConfig, dir: &Path) -> Result<CorpusManifest> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let instances = cfg.pool_instances()?;
    let mut files = Vec::new();
    let mut records = Vec::new();
    for &policy in &cfg.policies {
        let per_instance: Vec<Vec<String>> = instances
            .par_iter()
            .map(|inst| instance_records(cfg, inst, policy))
            .collect::<Result<_>>()?;
        for split in [Split::Train, Split::Val] {
            let file = files.len();
            let mut text = String::new();
            let mut index = 0;
            for (inst, recs) in instances.iter().zip(&per_instance) {
                if inst.split != split {
                    continue;
                }
                for (trace, rec) in recs.iter().enumerate() {
                    if index > 0 {
                        text.push('\n');
                    }
                    text.push_str(rec);
                    records.push(RecordEntry {
                        file,
                        index,
                        instance: inst.id.clone(),
                        trace,
                        policy: policy.to_string(),
                        split,
                    });
                    index += 1;
                }
            }
            let path = format!("{}.{}.txt", policy.to_string().replace(':', "_"), split.as_str());
            fs::write(dir.join(&path), &text)?;
            files.push(CorpusFile {
                sha256: sha256_hex(text.as_bytes()),
                path,
                policy: policy.to_string(),
                split,
                records: index,
            });
        }
    }
    let manifest = CorpusManifest {
        format: match cfg.env.family() {
            treesearch::Family::Tree => TraceFormat::EmpiricalTree,
            treesearch::Family::Nav => TraceFormat::EmpiricalNav,
        },
        config: cfg.clone(),
        instances,
        files,
        records,
        vocab: cfg.env.vocab(cfg.budget),
    };
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
