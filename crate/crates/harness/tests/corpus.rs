use std::collections::HashSet;
use std::fs;

use treesearch::search::PolicyKind;
use treesearch::tracecodec::{decode_empirical, parse_empirical};
use treesearch::Family;
use treesearch_harness::config::Split;
use treesearch_harness::corpus::{split_records, CorpusManifest};
use treesearch_harness::{gen_corpus, EnvConfig, ExperimentConfig};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::Tree {
            branching: 2,
            depth: 4,
            num_goals: 2,
        },
        policies: vec![PolicyKind::UniformLeaf, PolicyKind::PathUct { c: 0.1 }],
        budget: 8,
        n_train_instances: 10,
        traces_per_instance: 3,
        ..Default::default()
    }
}

#[test]
fn default_sizes_give_twenty_thousand_records() {
    let dir = tempfile::tempdir().unwrap();
    // The budget does not change the counts, only the record length.
    let cfg = ExperimentConfig {
        budget: 2,
        ..Default::default()
    };
    let m = gen_corpus(&cfg, dir.path()).unwrap();
    assert_eq!(m.records.len(), 20_000);
    let n = |s: Split| m.records.iter().filter(|r| r.split == s).count();
    assert_eq!((n(Split::Train), n(Split::Val)), (14_000, 6_000));
}

#[test]
fn a_single_trace_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n_train_instances: 1,
        traces_per_instance: 1,
        ..small()
    };
    let cfg = ExperimentConfig {
        policies: vec![PolicyKind::GreedyLeaf],
        ..cfg
    };
    let m = gen_corpus(&cfg, dir.path()).unwrap();
    assert_eq!(m.records.len(), 1);
}

#[test]
fn regeneration_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = gen_corpus(&small(), a.path()).unwrap();
    let mb = gen_corpus(&small(), b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    for f in &ma.files {
        assert_eq!(fs::read(a.path().join(&f.path)).unwrap(), fs::read(b.path().join(&f.path)).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("manifest.json")).unwrap(),
        fs::read(b.path().join("manifest.json")).unwrap()
    );
    let other = gen_corpus(&ExperimentConfig { seed: 3, ..small() }, b.path()).unwrap();
    assert_ne!(other.files[0].sha256, ma.files[0].sha256);
}

#[test]
fn manifest_checksums_catch_edits() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(&small(), dir.path()).unwrap();
    let m = CorpusManifest::load(dir.path()).unwrap();
    m.verify(dir.path()).unwrap();
    let p = dir.path().join(&m.files[0].path);
    let text = fs::read_to_string(&p).unwrap().replacen("0.00", "0.01", 1);
    fs::write(&p, text).unwrap();
    assert!(m.verify(dir.path()).is_err());
}

#[test]
fn records_decode_against_their_instances() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_corpus(&small(), dir.path()).unwrap();
    let texts: Vec<String> = m.files.iter().map(|f| fs::read_to_string(dir.path().join(&f.path)).unwrap()).collect();
    let split: Vec<Vec<&str>> = texts.iter().map(|t| split_records(t)).collect();
    for (f, recs) in m.files.iter().zip(&split) {
        assert_eq!(f.records, recs.len());
    }
    let mut train = HashSet::new();
    let mut val = HashSet::new();
    for r in &m.records {
        let inst = m.instances.iter().find(|i| i.id == r.instance).unwrap();
        assert_eq!(inst.split, r.split);
        match r.split {
            Split::Train => train.insert(&r.instance),
            _ => val.insert(&r.instance),
        };
        let tree = inst.spec.build().unwrap();
        let text = split[r.file][r.index];
        let rec = parse_empirical(text, Family::Tree).unwrap();
        let t = decode_empirical(&rec, tree.as_ref()).unwrap();
        t.validate(tree.as_ref()).unwrap();
        assert_eq!(t.num_selections(), 8);
        // Every word has an id.
        m.vocab.encode(&rec.words()).unwrap();
        assert!(tree.num_states().unwrap() > 8);
    }
    assert!(train.is_disjoint(&val));
    assert_eq!((train.len(), val.len()), (7, 3));
}

#[test]
fn navigation_corpus_uses_the_nav_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        env: EnvConfig::Nav {
            width: 5,
            height: 5,
            wall_density: 0.2,
            num_goals: 1,
            max_path_len: 10,
        },
        policies: vec![PolicyKind::UniformPath],
        budget: 10,
        n_train_instances: 4,
        traces_per_instance: 2,
        ..Default::default()
    };
    let m = gen_corpus(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(&m.files[0].path)).unwrap();
    for rec in split_records(&text) {
        let r = parse_empirical(rec, Family::Nav).unwrap();
        m.vocab.encode(&r.words()).unwrap();
    }
    assert!(m.vocab.id("x4y4").is_some());
}
