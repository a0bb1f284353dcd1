use treesearch::search::PolicyKind;
use treesearch_harness::sweep::write_sweep_csv;
use treesearch_harness::{run_eval, sweep, Agent, Axis, EnvConfig, ExperimentConfig};

fn tree_cfg() -> ExperimentConfig {
    ExperimentConfig {
        n_test_instances: 3,
        test_traces: 10,
        ..Default::default()
    }
}

fn nav_cfg() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::Nav {
            width: 6,
            height: 6,
            wall_density: 0.2,
            num_goals: 2,
            max_path_len: 12,
        },
        ..tree_cfg()
    }
}

#[test]
fn goal_counts_on_depth_six_trees() {
    let rows = sweep(&tree_cfg(), Axis::Goals, &[1.0, 2.0, 4.0, 8.0], &mut Agent::Policy(PolicyKind::UniformLeaf)).unwrap();
    assert_eq!(rows.len(), 4);
    let unseen: Vec<bool> = rows.iter().map(|r| r.outside_training).collect();
    assert_eq!(unseen, vec![true, true, true, false]);
}

#[test]
fn navigation_budgets_beyond_training_are_marked() {
    let rows = sweep(&nav_cfg(), Axis::Budget, &[25.0, 50.0, 75.0, 100.0], &mut Agent::Policy(PolicyKind::PathGreedy)).unwrap();
    assert_eq!(rows.len(), 4);
    let unseen: Vec<bool> = rows.iter().map(|r| r.outside_training).collect();
    assert_eq!(unseen, vec![false, false, true, true]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    write_sweep_csv(&p, &rows).unwrap();
    let text = std::fs::read_to_string(p).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("axis,value,outside_training,hit_rate_mean"));
}

#[test]
fn a_single_value_is_a_plain_evaluation() {
    let cfg = nav_cfg();
    let mut agent = Agent::Policy(PolicyKind::UniformPath);
    let rows = sweep(&cfg, Axis::WallDensity, &[0.3], &mut agent).unwrap();
    let mut c = cfg.clone();
    if let EnvConfig::Nav { wall_density, .. } = &mut c.env {
        *wall_density = 0.3;
    }
    assert_eq!(rows[0].metrics, run_eval(&c, &mut agent).unwrap().metrics);
    let same = sweep(&cfg, Axis::Depth, &[6.0], &mut agent);
    assert!(same.is_err());
}

#[test]
fn axes_must_fit_the_family() {
    let mut agent = Agent::Policy(PolicyKind::UniformLeaf);
    assert!(sweep(&tree_cfg(), Axis::WallDensity, &[0.1], &mut agent).is_err());
    assert!(sweep(&tree_cfg(), Axis::Depth, &[2.5], &mut agent).is_err());
    assert!("K".parse::<Axis>().is_ok());
    assert!("width".parse::<Axis>().is_err());
    let rows = sweep(&tree_cfg(), Axis::Depth, &[4.0, 6.0], &mut agent).unwrap();
    assert_eq!(rows.iter().map(|r| r.outside_training).collect::<Vec<_>>(), vec![true, false]);
}
