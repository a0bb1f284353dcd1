use treesearch::envs::{generate_tree, TreeSpec, ValueEstimator};
use treesearch::metrics::{aggregate, score_run, Metric};
use treesearch::search::{run_search, PolicyKind, SearchConfig, StopReason, SuccessorRule};
use treesearch::{frontier_after, RngStream, TreeEnv};
use treesearch_hardattn::{build_model, rollout_with_model, Error, ModelToken};

#[test]
fn uniform_leaf_model_visits_everything_with_a_full_budget() {
    let tree = generate_tree(&TreeSpec::new(2, 3, 1, 4).unwrap()).unwrap();
    let m = build_model(PolicyKind::UniformLeaf, 14, 2, SuccessorRule::Pruned).unwrap();
    let run = rollout_with_model(&m, &tree, &ValueEstimator::default(), 14, &RngStream::new(1, "r")).unwrap();
    assert_eq!(run.trajectory.steps.len(), 15);
    let o = score_run(&run.trajectory, &tree);
    assert!(o.hit);
}

#[test]
fn constructed_models_never_break_protocol() {
    for p in PolicyKind::ALL {
        for rule in [SuccessorRule::Pruned, SuccessorRule::Full] {
            let m = build_model(p, 20, 2, rule).unwrap();
            for seed in 0..20 {
                let tree = generate_tree(&TreeSpec::new(2, 4, 3, seed).unwrap()).unwrap();
                let run = rollout_with_model(&m, &tree, &ValueEstimator::default(), 20, &RngStream::new(seed, "p")).unwrap();
                run.trajectory.validate(&tree).unwrap();
                frontier_after(&run.trajectory.steps).unwrap();
                if rule == SuccessorRule::Pruned {
                    assert_ne!(run.stop, StopReason::Stalled);
                }
                for (path, st) in run.paths.iter().zip(&run.trajectory.steps) {
                    assert_eq!(path, &tree.path_from_root(st.state));
                }
            }
        }
    }
}

#[test]
fn budget_beyond_capacity_is_refused() {
    let tree = generate_tree(&TreeSpec::new(2, 3, 1, 0).unwrap()).unwrap();
    let m = build_model(PolicyKind::PathGreedy, 5, 2, SuccessorRule::Pruned).unwrap();
    let err = rollout_with_model(&m, &tree, &ValueEstimator::default(), 6, &RngStream::new(0, "c")).unwrap_err();
    assert!(matches!(err, Error::Capacity { .. }));
}

#[test]
fn a_broken_read_out_is_a_protocol_violation() {
    let tree = generate_tree(&TreeSpec::new(2, 3, 1, 0).unwrap()).unwrap();
    let mut m = build_model(PolicyKind::UniformLeaf, 5, 2, SuccessorRule::Pruned).unwrap();
    // Make `#` win every argmax.
    let bias = m.layout.index("bias").unwrap();
    for row in m.unembedding.rows.iter_mut() {
        if row.0 == ModelToken::Hash {
            row.1 = vec![(bias, 1e6)];
        }
    }
    let err = rollout_with_model(&m, &tree, &ValueEstimator::default(), 5, &RngStream::new(0, "b")).unwrap_err();
    assert!(matches!(err, Error::Protocol { token: ModelToken::Hash, .. }));
}

#[test]
fn model_and_reference_agree_on_average() {
    // Same policy, independent randomness: hit rates within a few standard
    // errors of each other.
    let n = 200;
    for p in [PolicyKind::PathUct { c: 0.1 }, PolicyKind::GreedyLeaf] {
        let m = build_model(p, 12, 2, SuccessorRule::Pruned).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..n {
            let tree = generate_tree(&TreeSpec::new(2, 4, 2, i).unwrap()).unwrap();
            let r = RngStream::new(i, "agree");
            let run = rollout_with_model(&m, &tree, &ValueEstimator::default(), 12, &r).unwrap();
            a.push(score_run(&run.trajectory, &tree));
            let r = RngStream::new(i + 10_000, "agree");
            let run = run_search(&tree, &SearchConfig::new(12, p), &r).unwrap();
            b.push(score_run(&run.trajectory, &tree));
        }
        let (x, y) = (aggregate(&a).unwrap(), aggregate(&b).unwrap());
        let (sx, sy) = (x.get(Metric::HitRate), y.get(Metric::HitRate));
        let se = ((sx.std.powi(2) + sy.std.powi(2)) / n as f64).sqrt();
        assert!((sx.mean - sy.mean).abs() < 4.0 * se + 1e-9, "{p}: {} vs {}", sx.mean, sy.mean);
    }
}
