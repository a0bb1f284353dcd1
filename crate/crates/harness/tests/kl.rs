use treesearch::search::PolicyKind;
use treesearch_hardattn::build_model;
use treesearch_harness::kl::{kl_eval, write_kl_csv, DistSource};
use treesearch_harness::{EnvConfig, ExperimentConfig};

fn cfg() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::Tree {
            branching: 2,
            depth: 4,
            num_goals: 2,
        },
        budget: 10,
        n_test_instances: 2,
        ..Default::default()
    }
}

fn exact(policy: PolicyKind) -> DistSource {
    DistSource::Policy { policy, samples: None }
}

#[test]
fn a_policy_against_itself_or_its_model_is_zero() {
    for p in PolicyKind::ALL {
        let rows = kl_eval(&cfg(), p, &exact(p), &exact(p), 2).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 10);
        // Zero entries of q are raised to the floor, so identical
        // distributions land within a few floors of zero.
        assert!(rows.iter().all(|r| r.kl.abs() < 1e-4));
        let model = DistSource::Model(Box::new(build_model(p, 10, 2, Default::default()).unwrap()));
        let rows = kl_eval(&cfg(), p, &exact(p), &model, 2).unwrap();
        let bad: Vec<_> = rows.iter().filter(|r| !(r.kl.abs() < 1e-4 && !r.smoothed)).collect();
        assert!(bad.is_empty(), "{p}: {bad:?}");
    }
}

#[test]
fn different_policies_diverge() {
    let rows = kl_eval(&cfg(), PolicyKind::UniformLeaf, &exact(PolicyKind::UniformLeaf), &exact(PolicyKind::PathGreedy), 2).unwrap();
    assert!(rows.iter().any(|r| r.kl > 0.1));
    assert!(rows.iter().any(|r| r.smoothed));
    assert!(rows.iter().all(|r| r.kl.is_finite() && r.kl >= 0.0));
}

#[test]
fn sampled_reference_is_close_to_exact() {
    let p = PolicyKind::UniformPath;
    let sampled = DistSource::Policy {
        policy: p,
        samples: Some(100),
    };
    let rows = kl_eval(&cfg(), p, &sampled, &exact(p), 1).unwrap();
    let mean = rows.iter().map(|r| r.kl).sum::<f64>() / rows.len() as f64;
    assert!(mean < 0.2, "{mean}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kl.csv");
    write_kl_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("instance,trace,step,frontier,kl,smoothed\n"));
}
