//! Driving constructed models as search agents.

use std::collections::HashMap;

use treesearch::envs::{centi, ValueEstimator};
use treesearch::rng::pick;
use treesearch::search::{NextStateDistribution, StopReason};
use treesearch::tracecodec::{encode_leaf_theoretical, encode_tree_theoretical, StateNumbering};
use treesearch::{frontier_after, RngStream, StateId, StepRecord, Trajectory, TreeEnv};

use crate::error::{Error, Result};
use crate::model::{HardAttnModel, ModelKind};
use crate::session::Session;
use crate::token::{from_symbolic, ModelToken};

fn protocol(token: ModelToken, expected: &str) -> Error {
    Error::Protocol {
        token,
        expected: expected.to_string(),
    }
}

/// Distribution over the next selected state implied by greedy decoding,
/// enumerating every tie. Leaf models are read at the `?` that opens the
/// next step; tree models are unrolled until they emit `%`.
pub fn model_next_state(
    model: &HardAttnModel,
    prefix: &[StepRecord],
    tree: &dyn TreeEnv,
) -> Result<NextStateDistribution> {
    let frontier = frontier_after(prefix)?;
    let t = Trajectory::new(prefix.to_vec());
    let mut out = NextStateDistribution {
        support: frontier.members().to_vec(),
        probs: vec![0.0; frontier.len()],
        revisits: Vec::new(),
    };
    let add = |s: StateId, p: f64, out: &mut NextStateDistribution| -> Result<()> {
        match out.support.iter().position(|&x| x == s) {
            Some(i) => out.probs[i] += p,
            None if prefix.iter().any(|st| st.state == s) => match out.revisits.iter_mut().find(|r| r.0 == s) {
                Some(r) => r.1 += p,
                None => out.revisits.push((s, p)),
            },
            None => return Err(protocol(ModelToken::State(u32::MAX), "a revealed state")),
        }
        Ok(())
    };
    let mut session = Session::new(model);
    match model.kind {
        ModelKind::Leaf { .. } => {
            let sym = encode_leaf_theoretical(&t);
            session.push_all(&from_symbolic(&sym.tokens))?;
            session.push(ModelToken::Query)?;
            let dist = session.next_token()?;
            for (&tok, &p) in dist.support.iter().zip(&dist.probs) {
                let s = match tok {
                    ModelToken::State(k) => sym.numbering.state(k),
                    _ => None,
                }
                .filter(|s| frontier.contains(*s))
                .ok_or_else(|| protocol(tok, "a frontier state"))?;
                add(s, p, &mut out)?;
            }
        }
        ModelKind::Tree { .. } => {
            let paths: Vec<Vec<StateId>> = prefix.iter().map(|s| tree.path_from_root(s.state)).collect();
            let sym = encode_tree_theoretical(&t, &paths)?;
            session.push_all(&from_symbolic(&sym.tokens))?;
            session.push(ModelToken::Query)?;
            let kids: HashMap<StateId, &[StateId]> =
                prefix.iter().map(|s| (s.state, s.children.as_slice())).collect();
            let mut ends = Vec::new();
            unroll(&mut session, &sym.numbering, &kids, None, 1.0, &mut ends)?;
            for (s, p) in ends {
                add(s, p, &mut out)?;
            }
        }
    }
    Ok(out)
}

// Depth-first over every tie the model can produce. `last` is the state
// the walk currently stands on.
fn unroll(
    session: &mut Session,
    numbering: &StateNumbering,
    kids: &HashMap<StateId, &[StateId]>,
    last: Option<StateId>,
    p: f64,
    ends: &mut Vec<(StateId, f64)>,
) -> Result<()> {
    let dist = session.next_token()?;
    let n = dist.support.len() as f64;
    let prev = *session.tokens().last().expect("session is not empty");
    for &tok in &dist.support {
        let q = p / n;
        let next = match (prev, tok, last) {
            (ModelToken::Query, ModelToken::State(0), None) => numbering.state(0),
            (ModelToken::Gt, ModelToken::State(k), Some(s)) => numbering
                .state(k)
                .filter(|c| kids.get(&s).is_some_and(|ks| ks.contains(c))),
            (ModelToken::State(_), ModelToken::Gt, Some(_)) => last,
            (ModelToken::State(_), ModelToken::Percent, Some(s)) => {
                ends.push((s, q));
                continue;
            }
            _ => None,
        };
        let Some(next) = next else {
            return Err(protocol(tok, &format!("a legal continuation of `{prev}`")));
        };
        session.push(tok)?;
        let r = unroll(session, numbering, kids, Some(next), q, ends);
        session.pop();
        r?;
    }
    Ok(())
}

/// Result of a closed-loop rollout of a constructed model.
#[derive(Clone, Debug)]
pub struct ModelRun {
    pub trajectory: Trajectory,
    pub paths: Vec<Vec<StateId>>,
    pub stop: StopReason,
}

struct Rollout<'m> {
    session: Session<'m>,
    numbering: StateNumbering,
    steps: Vec<StepRecord>,
    paths: Vec<Vec<StateId>>,
    frontier: Vec<StateId>,
    kids: HashMap<StateId, Vec<StateId>>,
}

impl Rollout<'_> {
    // Appends `% V # children` for the state the walk ended on. The final
    // step is never read back, so its tokens are skipped; this keeps a full
    // budget within the model's state capacity.
    fn record(&mut self, tree: &dyn TreeEnv, s: StateId, path: Vec<StateId>, v: f64, last: bool) -> Result<()> {
        let children = tree.children(s);
        if !last {
            self.session.push(ModelToken::Percent)?;
            self.session.push(ModelToken::Value(centi(v).clamp(0, 100) as u8))?;
            self.session.push(ModelToken::Hash)?;
            for &c in &children {
                let k = self.numbering.number(c);
                self.session.push(ModelToken::State(k))?;
            }
        }
        self.frontier.retain(|&x| x != s);
        self.frontier.extend(children.iter().copied());
        self.kids.insert(s, children.clone());
        self.steps.push(StepRecord {
            state: s,
            value: v,
            children,
        });
        self.paths.push(path);
        Ok(())
    }

    fn state_of(&self, tok: ModelToken) -> Option<StateId> {
        match tok {
            ModelToken::State(k) => self.numbering.state(k),
            _ => None,
        }
    }

    fn is_child(&self, parent: StateId, c: StateId) -> bool {
        self.kids.get(&parent).is_some_and(|ks| ks.contains(&c))
    }
}

fn draw(session: &Session, rng: &mut RngStream) -> Result<ModelToken> {
    let d = session.next_token()?;
    Ok(d.support[pick(rng, d.support.len())])
}

/// Lets the model pick every selection while the environment supplies
/// values and children. Ties are broken with the `policy` child stream of
/// `rng`, values use the `value` stream, as in `run_search`.
pub fn rollout_with_model(
    model: &HardAttnModel,
    tree: &dyn TreeEnv,
    estimator: &ValueEstimator,
    budget: usize,
    rng: &RngStream,
) -> Result<ModelRun> {
    if budget > model.budget {
        return Err(Error::Capacity {
            needed: budget,
            available: model.budget,
        });
    }
    let mut policy_rng = rng.derive("policy");
    let mut value_rng = rng.derive("value");
    let is_tree = matches!(model.kind, ModelKind::Tree { .. });
    let mut ro = Rollout {
        session: Session::new(model),
        numbering: StateNumbering::default(),
        steps: Vec::new(),
        paths: Vec::new(),
        frontier: Vec::new(),
        kids: HashMap::new(),
    };
    let root = tree.root();
    if is_tree {
        ro.session.push(ModelToken::Bos)?;
    }
    ro.session.push(ModelToken::Query)?;
    let k = ro.numbering.number(root);
    ro.session.push(ModelToken::State(k))?;
    let v0 = estimator.observe(tree, root, &mut value_rng);
    ro.record(tree, root, vec![root], v0, budget == 0)?;

    let mut stop = StopReason::Budget;
    for i in 0..budget {
        if ro.frontier.is_empty() {
            stop = StopReason::Exhausted;
            break;
        }
        ro.session.push(ModelToken::Query)?;
        let path = if is_tree {
            let first = draw(&ro.session, &mut policy_rng)?;
            if first != ModelToken::State(0) {
                return Err(protocol(first, "the root state"));
            }
            ro.session.push(first)?;
            let mut path = vec![root];
            loop {
                let tok = draw(&ro.session, &mut policy_rng)?;
                match tok {
                    ModelToken::Percent => break,
                    ModelToken::Gt => {
                        ro.session.push(tok)?;
                        let cur = *path.last().unwrap();
                        let child = draw(&ro.session, &mut policy_rng)?;
                        let c = ro
                            .state_of(child)
                            .filter(|&c| ro.is_child(cur, c))
                            .ok_or_else(|| protocol(child, "a child of the current state"))?;
                        ro.session.push(child)?;
                        path.push(c);
                    }
                    other => return Err(protocol(other, "`>` or `%`")),
                }
            }
            path
        } else {
            let tok = draw(&ro.session, &mut policy_rng)?;
            let s = ro
                .state_of(tok)
                .filter(|s| ro.frontier.contains(s))
                .ok_or_else(|| protocol(tok, "a frontier state"))?;
            ro.session.push(tok)?;
            tree.path_from_root(s)
        };
        let s = *path.last().unwrap();
        if !ro.frontier.contains(&s) {
            stop = StopReason::Stalled;
            break;
        }
        let v = estimator.observe(tree, s, &mut value_rng);
        ro.record(tree, s, path, v, i + 1 == budget)?;
    }
    Ok(ModelRun {
        trajectory: Trajectory::new(ro.steps),
        paths: ro.paths,
        stop,
    })
}
