use std::collections::HashSet;
use std::fs;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use treesearch::metrics::{l2_metric_distance, Metric};
use treesearch::search::{run_search, PolicyKind};
use treesearch::{RngStream, StateId, TreeEnv};
use treesearch_hardattn::build_model;
use treesearch_harness::eval::{comparison_matrix, eval_label, write_comparison_csv, write_metrics_csv, write_runs_csv};
use treesearch_harness::session::{spawn_local_agent, Chooser, ScriptChooser};
use treesearch_harness::{run_eval, Agent, EnvConfig, ExperimentConfig};

fn cfg(test_instances: usize, test_traces: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_test_instances: test_instances,
        test_traces,
        ..Default::default()
    }
}

struct Plain {
    hit: f64,
    dcg: f64,
    highest: f64,
    cumulative: f64,
}

// Uniform leaf sampling written out directly: a list of open states, a
// uniform pick, rewards read off the tree.
fn plain_uniform_leaf(tree: &dyn TreeEnv, budget: usize, rng: &mut StdRng) -> Plain {
    let best = tree.best_reward();
    let mut open: Vec<StateId> = tree.children(tree.root());
    let mut rewards = vec![tree.reward(tree.root())];
    let mut first_hit = None;
    for t in 1..=budget {
        if open.is_empty() {
            break;
        }
        let s = open.swap_remove(rng.gen_range(0..open.len()));
        let r = tree.reward(s);
        if r == best && first_hit.is_none() {
            first_hit = Some(t);
        }
        rewards.push(r);
        open.extend(tree.children(s));
    }
    Plain {
        hit: first_hit.map_or(0.0, |_| 1.0),
        dcg: first_hit.map_or(0.0, |i| 1.0 / ((i + 1) as f64).log2()),
        highest: rewards.iter().cloned().fold(0.0, f64::max),
        cumulative: rewards.iter().sum(),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, (v / n).sqrt())
}

#[test]
fn uniform_leaf_matches_a_plain_reimplementation() {
    let c = cfg(10, 100);
    let report = run_eval(&c, &mut Agent::Policy(PolicyKind::UniformLeaf)).unwrap();
    assert_eq!(report.metrics.n, 1000);
    let mut rng = StdRng::seed_from_u64(99);
    let mut plain = Vec::new();
    for inst in c.test_instances().unwrap() {
        let tree = inst.spec.build().unwrap();
        for _ in 0..100 {
            plain.push(plain_uniform_leaf(tree.as_ref(), 50, &mut rng));
        }
    }
    let pairs: [(Metric, Vec<f64>); 4] = [
        (Metric::HitRate, plain.iter().map(|p| p.hit).collect()),
        (Metric::Dcg, plain.iter().map(|p| p.dcg).collect()),
        (Metric::HighestReward, plain.iter().map(|p| p.highest).collect()),
        (Metric::CumulativeReward, plain.iter().map(|p| p.cumulative).collect()),
    ];
    for (metric, xs) in pairs {
        let (m, se) = mean_se(&xs);
        let s = report.metrics.get(metric);
        let se_a = s.se95 / 1.96;
        let band = 1.96 * (se * se + se_a * se_a).sqrt();
        assert!((s.mean - m).abs() <= band, "{}: {} vs {m} (band {band})", metric.name(), s.mean);
    }
}

#[test]
fn the_report_recomputes_from_raw_trajectories() {
    let c = cfg(3, 20);
    let report = run_eval(&c, &mut Agent::Policy(PolicyKind::PathGreedy)).unwrap();
    let mut i = 0;
    let mut hits = 0.0;
    for inst in c.test_instances().unwrap() {
        let tree = inst.spec.build().unwrap();
        for t in 0..20 {
            let rng = RngStream::new(c.seed, eval_label(&inst.id, t));
            let run = run_search(tree.as_ref(), &c.search_config(PolicyKind::PathGreedy), &rng).unwrap();
            let rewards: Vec<f64> = run.trajectory.steps.iter().map(|s| tree.reward(s.state)).collect();
            let hit = rewards.contains(&tree.best_reward());
            let row = &report.runs[i];
            assert_eq!(row.hit, hit);
            assert_eq!(row.cumulative_reward, rewards.iter().sum::<f64>());
            assert_eq!(row.instance, inst.id);
            hits += hit as u8 as f64;
            i += 1;
        }
    }
    assert_eq!(report.metrics.get(Metric::HitRate).mean, hits / 60.0);
    // Same config, same numbers.
    let again = run_eval(&c, &mut Agent::Policy(PolicyKind::PathGreedy)).unwrap();
    assert_eq!(again.metrics, report.metrics);
}

#[test]
fn constructed_uct_is_as_close_as_a_reseeded_reference() {
    let policy = PolicyKind::PathUct { c: 0.1 };
    let c = cfg(10, 30);
    let model = build_model(policy, 50, 2, c.rule).unwrap();
    let base = run_eval(&c, &mut Agent::Policy(policy)).unwrap().metrics;
    let m = run_eval(&ExperimentConfig { seed: 11, ..c.clone() }, &mut Agent::Model(Box::new(model))).unwrap();
    assert!(m.runs.iter().all(|r| !r.failed));
    let floor = (1..=3)
        .map(|s| {
            let other = run_eval(&ExperimentConfig { seed: 100 + s, ..c.clone() }, &mut Agent::Policy(policy)).unwrap();
            l2_metric_distance(&base, &other.metrics)
        })
        .fold(0.0, f64::max);
    let d = l2_metric_distance(&base, &m.metrics);
    assert!(d < floor, "model distance {d}, reseed floor {floor}");
}

#[test]
fn a_large_budget_always_hits() {
    let c = ExperimentConfig {
        env: EnvConfig::Tree {
            branching: 2,
            depth: 3,
            num_goals: 2,
        },
        budget: 14,
        ..cfg(4, 5)
    };
    for p in PolicyKind::ALL {
        let r = run_eval(&c, &mut Agent::Policy(p)).unwrap();
        assert_eq!(r.metrics.get(Metric::HitRate).mean, 1.0, "{p}");
        let model = build_model(p, 14, 2, c.rule).unwrap();
        let r = run_eval(&c, &mut Agent::Model(Box::new(model))).unwrap();
        assert_eq!(r.metrics.get(Metric::HitRate).mean, 1.0, "{p} model");
    }
}

#[test]
fn failed_external_runs_are_misses() {
    let c = cfg(2, 3);
    let transport = spawn_local_agent(
        |_| Box::new(ScriptChooser::new(vec!["r0d0".into()])) as Box<dyn Chooser>,
        Duration::from_secs(10),
    );
    let mut agent = Agent::External {
        name: "bad".into(),
        transport: Box::new(transport),
    };
    let r = run_eval(&c, &mut agent).unwrap();
    assert_eq!(r.runs.len(), 6);
    assert!(r.runs.iter().all(|x| x.failed && !x.hit));
    assert_eq!(r.metrics.get(Metric::HitRate).mean, 0.0);
    assert!(r.runs[0].error.as_deref().unwrap().contains("frontier"));
}

#[test]
fn models_built_too_small_are_refused() {
    let model = build_model(PolicyKind::UniformLeaf, 10, 2, Default::default()).unwrap();
    assert!(run_eval(&cfg(1, 1), &mut Agent::Model(Box::new(model))).is_err());
}

#[test]
fn reports_are_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(2, 5);
    let a = run_eval(&c, &mut Agent::Policy(PolicyKind::UniformLeaf)).unwrap();
    let b = run_eval(&c, &mut Agent::Policy(PolicyKind::PathUct { c: 0.1 })).unwrap();
    write_metrics_csv(&dir.path().join("m.csv"), &a.metrics).unwrap();
    write_runs_csv(&dir.path().join("r.csv"), &a.runs).unwrap();
    let reports = vec![("uniform-leaf".to_string(), a.metrics.clone()), ("path-uct".to_string(), b.metrics.clone())];
    write_comparison_csv(&dir.path().join("c.csv"), &reports).unwrap();
    let m = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = m.lines().collect();
    assert_eq!(lines[0], "metric,mean,std,se95");
    assert_eq!(lines.len(), 7);
    let names: HashSet<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert!(names.contains("norm_path_len"));
    let r = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(r.lines().count(), 11);
    let mat = comparison_matrix(&reports);
    assert_eq!(mat[0][0], 0.0);
    assert_eq!(mat[0][1], mat[1][0]);
    assert_eq!(mat[0][1], l2_metric_distance(&a.metrics, &b.metrics));
    let cm = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(cm.starts_with(",uniform-leaf,path-uct\n"));
}
