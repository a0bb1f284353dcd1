use treesearch::envs::{generate_tree, SearchTree, TreeSpec};
use treesearch::search::{
    run_search, DistMode, NextStateDistribution, PolicyKind, SearchConfig, SearchState, SuccessorRule,
};
use treesearch::{RngStream, StepRecord, TreeEnv};
use treesearch_hardattn::{build_model, model_next_state, HardAttnModel};

const BUDGET: usize = 15;

fn tree_for(seed: u64) -> SearchTree {
    let depth = 2 + (seed % 3) as usize;
    let goals = 1 + (seed % 4) as usize;
    generate_tree(&TreeSpec::new(2, depth, goals, seed).unwrap()).unwrap()
}

fn sorted(mut d: NextStateDistribution) -> NextStateDistribution {
    d.revisits.sort_by_key(|r| r.0);
    d
}

#[derive(Default, Debug)]
struct Coverage {
    prefixes: usize,
    ties: usize,
    revisits: usize,
}

fn compare(model: &HardAttnModel, tree: &SearchTree, prefix: &[StepRecord], reference: &SearchConfig, cov: &mut Coverage) -> bool {
    let st = SearchState::from_prefix(tree, prefix).unwrap();
    if st.frontier().is_empty() {
        return false;
    }
    let want = sorted(st.distribution(reference, DistMode::Analytic).unwrap());
    let got = sorted(model_next_state(model, prefix, tree).unwrap());
    assert_eq!(got, want, "{} {:?} prefix {}", reference.policy, reference.rule, prefix.len());
    cov.prefixes += 1;
    if want.positive().len() + want.revisits.len() > 1 {
        cov.ties += 1;
    }
    if !want.revisits.is_empty() {
        cov.revisits += 1;
    }
    true
}

/// Compares the model against the reference at every prefix of `runs`
/// seeded trajectories.
fn check(model: &HardAttnModel, policy: PolicyKind, rule: SuccessorRule, runs: u64) -> Coverage {
    let mut cov = Coverage::default();
    for seed in 0..runs {
        let tree = tree_for(seed);
        let cfg = SearchConfig::new(BUDGET, policy);
        let run = run_search(&tree, &cfg, &RngStream::new(seed, "equivalence")).unwrap();
        let steps = &run.trajectory.steps;
        let reference = SearchConfig::new(1, policy).with_rule(rule);
        for t in 1..=steps.len().min(BUDGET) {
            if !compare(model, &tree, &steps[..t], &reference, &mut cov) {
                break;
            }
        }
    }
    cov
}

/// Random frontier picks with values drawn from a small grid, so that
/// value ties and distinct values both occur.
fn check_random(model: &HardAttnModel, policy: PolicyKind, rule: SuccessorRule, runs: u64) -> Coverage {
    let mut cov = Coverage::default();
    let reference = SearchConfig::new(1, policy).with_rule(rule);
    for seed in 0..runs {
        let tree = tree_for(seed);
        let mut rng = RngStream::new(seed, "equivalence/random");
        let grid = [0.0, 0.1, 0.25, 0.5, 1.0];
        let mut steps = vec![StepRecord {
            state: tree.root(),
            value: grid[rng.below(5)],
            children: tree.children(tree.root()),
        }];
        let mut frontier = tree.children(tree.root());
        while steps.len() <= BUDGET && !frontier.is_empty() {
            if !compare(model, &tree, &steps, &reference, &mut cov) {
                break;
            }
            let s = frontier.remove(rng.below(frontier.len()));
            frontier.extend(tree.children(s));
            steps.push(StepRecord {
                state: s,
                value: grid[rng.below(5)],
                children: tree.children(s),
            });
        }
    }
    cov
}

#[test]
fn leaf_models_match_reference_exactly() {
    for policy in [PolicyKind::UniformLeaf, PolicyKind::GreedyLeaf] {
        let model = build_model(policy, BUDGET, 2, SuccessorRule::Pruned).unwrap();
        let a = check(&model, policy, SuccessorRule::Pruned, 30);
        let b = check_random(&model, policy, SuccessorRule::Pruned, 30);
        assert!(a.ties > 0 && b.ties > 0, "{a:?} {b:?}");
    }
}

#[test]
fn full_successor_tree_models_match_reference_exactly() {
    for policy in PolicyKind::ALL.into_iter().filter(|p| !p.is_leaf()) {
        let model = build_model(policy, BUDGET, 2, SuccessorRule::Full).unwrap();
        let a = check(&model, policy, SuccessorRule::Full, 30);
        let b = check_random(&model, policy, SuccessorRule::Full, 30);
        eprintln!("{policy} full: {a:?} {b:?}");
        assert!(a.ties > 0 && b.ties > 0);
        if policy == PolicyKind::UniformPath {
            assert!(a.revisits > 0);
        }
    }
}

#[test]
fn pruned_tree_models_match_reference_exactly() {
    for policy in PolicyKind::ALL.into_iter().filter(|p| !p.is_leaf()) {
        let model = build_model(policy, BUDGET, 2, SuccessorRule::Pruned).unwrap();
        let a = check(&model, policy, SuccessorRule::Pruned, 30);
        let b = check_random(&model, policy, SuccessorRule::Pruned, 30);
        eprintln!("{policy} pruned: {a:?} {b:?}");
        assert!(a.ties > 0 && b.ties > 0);
        assert_eq!(a.revisits + b.revisits, 0);
    }
}

#[test]
fn a_model_for_another_policy_is_caught() {
    let greedy = build_model(PolicyKind::PathGreedy, BUDGET, 2, SuccessorRule::Full).unwrap();
    let result = std::panic::catch_unwind(|| {
        check_random(&greedy, PolicyKind::PathUct { c: 0.1 }, SuccessorRule::Full, 10)
    });
    assert!(result.is_err());
}
