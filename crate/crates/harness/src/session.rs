//! Both ends of a protocol session.

use std::collections::HashMap;
use std::thread;
use std::time::Duration;

use rand::Rng;
use treesearch::envs::ValueEstimator;
use treesearch::search::SearchConfig;
use treesearch::search::SearchState;
use treesearch::tracecodec::{encode_empirical, TraceRecord};
use treesearch::{Family, Frontier, RngStream, StateId, StepRecord, Trajectory, TreeEnv};
use treesearch_hardattn::{model_next_state, HardAttnModel};

use crate::error::{Error, Result};
use crate::protocol::{channel_pair, ChannelTransport, DoneStatus, ProtocolMessage, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Env,
    Agent,
}

#[derive(Clone, Debug)]
pub struct SessionLog {
    /// Every line in the order it crossed the wire.
    pub messages: Vec<(Party, String)>,
    pub trajectory: Trajectory,
    pub status: DoneStatus,
    pub error: Option<String>,
}

impl SessionLog {
    pub fn record(&self, tree: &dyn TreeEnv) -> Result<TraceRecord> {
        Ok(encode_empirical(&self.trajectory, tree)?)
    }
}

struct EnvSide<'t> {
    transport: &'t mut dyn Transport,
    messages: Vec<(Party, String)>,
}

impl EnvSide<'_> {
    fn send(&mut self, msg: ProtocolMessage) -> Result<()> {
        let line = msg.to_string();
        self.messages.push((Party::Env, line.clone()));
        self.transport.send(&line)
    }

    fn feedback(&mut self, tree: &dyn TreeEnv, step: &StepRecord) -> Result<()> {
        self.send(ProtocolMessage::Feedback {
            state: tree.name(step.state),
            value: step.value,
            children: step.children.iter().map(|&c| tree.name(c)).collect(),
        })
    }

    // Waits for the agent's choice and checks it against the frontier.
    fn select(&mut self, tree: &dyn TreeEnv, frontier: &Frontier) -> std::result::Result<StateId, (DoneStatus, String)> {
        let line = match self.transport.recv() {
            Ok(l) => l,
            Err(Error::Timeout) => return Err((DoneStatus::Timeout, "no selection in time".into())),
            Err(e) => return Err((DoneStatus::Closed, e.to_string())),
        };
        self.messages.push((Party::Agent, line.clone()));
        let state = match line.parse::<ProtocolMessage>() {
            Ok(ProtocolMessage::Select { state }) => state,
            Ok(other) => return Err((DoneStatus::Malformed, format!("expected SELECT, got `{other}`"))),
            Err(e) => return Err((DoneStatus::Malformed, e.to_string())),
        };
        match tree.lookup(&state) {
            Some(s) if frontier.contains(s) => Ok(s),
            Some(_) => Err((DoneStatus::Illegal, format!("`{state}` is not in the frontier"))),
            None => Err((DoneStatus::Illegal, format!("`{state}` is not a revealed state"))),
        }
    }
}

/// Runs one session for `budget` selections. Values come from the `value`
/// child stream of `rng`, as in `run_search`, so an agent that runs the same
/// policy on the `policy` stream reproduces the reference trajectory.
pub fn serve_agent(
    tree: &dyn TreeEnv,
    budget: usize,
    estimator: &ValueEstimator,
    rng: &RngStream,
    transport: &mut dyn Transport,
) -> SessionLog {
    let mut value_rng = rng.derive("value");
    let mut env = EnvSide {
        transport,
        messages: Vec::new(),
    };
    let root = tree.root();
    let mut steps = vec![StepRecord {
        state: root,
        value: estimator.observe(tree, root, &mut value_rng),
        children: tree.children(root),
    }];
    let mut frontier = Frontier::default();
    for &c in &steps[0].children {
        frontier.push(c, root);
    }
    let mut outcome: std::result::Result<DoneStatus, (DoneStatus, String)> = Ok(DoneStatus::Ok);
    let opened = env.send(ProtocolMessage::Init {
        family: tree.family(),
        budget,
        root: tree.name(root),
    });
    if let Err(e) = opened {
        outcome = Err((DoneStatus::Closed, e.to_string()));
    }
    for _ in 0..budget {
        if outcome.is_err() {
            break;
        }
        if frontier.is_empty() {
            outcome = Ok(DoneStatus::Exhausted);
            break;
        }
        if let Err(e) = env.feedback(tree, steps.last().unwrap()) {
            outcome = Err((DoneStatus::Closed, e.to_string()));
            break;
        }
        match env.select(tree, &frontier) {
            Ok(s) => {
                let children = tree.children(s);
                frontier.remove(s);
                for &c in &children {
                    frontier.push(c, s);
                }
                steps.push(StepRecord {
                    state: s,
                    value: estimator.observe(tree, s, &mut value_rng),
                    children,
                });
            }
            Err(e) => outcome = Err(e),
        }
    }
    let (status, error) = match outcome {
        Ok(s) => (s, None),
        Err((s, msg)) => (s, Some(msg)),
    };
    if status != DoneStatus::Closed {
        // The agent may already be gone; the log keeps the attempt either way.
        let _ = env.send(ProtocolMessage::Done { status });
    }
    SessionLog {
        messages: env.messages,
        trajectory: Trajectory::new(steps),
        status,
        error,
    }
}

/// What an agent knows: the states it has been told about and the children
/// of the states it visited. Rewards are unknown and read as zero.
#[derive(Clone, Debug)]
pub struct KnownTree {
    family: Family,
    names: Vec<String>,
    ids: HashMap<String, StateId>,
    parent: Vec<Option<StateId>>,
    depth: Vec<usize>,
    children: HashMap<StateId, Vec<StateId>>,
}

impl KnownTree {
    pub fn new(family: Family, root: &str) -> Self {
        let mut t = Self {
            family,
            names: Vec::new(),
            ids: HashMap::new(),
            parent: Vec::new(),
            depth: Vec::new(),
            children: HashMap::new(),
        };
        t.intern(root, None);
        t
    }

    fn intern(&mut self, name: &str, parent: Option<StateId>) -> StateId {
        if let Some(&s) = self.ids.get(name) {
            return s;
        }
        let s = StateId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), s);
        self.parent.push(parent);
        self.depth.push(parent.map_or(0, |p| self.depth[p.index()] + 1));
        s
    }

    /// Records a visit. Returns the visited state's id and its children.
    pub fn reveal(&mut self, state: &str, children: &[String]) -> Result<(StateId, Vec<StateId>)> {
        let s = *self
            .ids
            .get(state)
            .ok_or_else(|| Error::Protocol(format!("feedback for unrevealed state `{state}`")))?;
        let kids: Vec<StateId> = children.iter().map(|c| self.intern(c, Some(s))).collect();
        self.children.insert(s, kids.clone());
        Ok((s, kids))
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s.index()]
    }
}

impl TreeEnv for KnownTree {
    fn family(&self) -> Family {
        self.family
    }

    fn root(&self) -> StateId {
        StateId(0)
    }

    fn children(&self, s: StateId) -> Vec<StateId> {
        self.children.get(&s).cloned().unwrap_or_default()
    }

    fn parent(&self, s: StateId) -> Option<StateId> {
        self.parent[s.index()]
    }

    fn depth(&self, s: StateId) -> usize {
        self.depth[s.index()]
    }

    fn reward(&self, _: StateId) -> f64 {
        0.0
    }

    fn best_reward(&self) -> f64 {
        0.0
    }

    fn truth_path_len(&self) -> usize {
        0
    }

    fn segment(&self, s: StateId) -> String {
        let name = &self.names[s.index()];
        name.rsplit('>').next().unwrap_or(name).to_string()
    }

    fn name(&self, s: StateId) -> String {
        self.names[s.index()].clone()
    }

    fn lookup(&self, name: &str) -> Option<StateId> {
        self.ids.get(name).copied()
    }
}

/// Decides the next selection from what the agent has seen so far.
pub trait Chooser: Send {
    /// Name of the state to select.
    fn choose(&mut self, known: &KnownTree, steps: &[StepRecord]) -> Result<String>;
}

/// Runs a reference policy on the agent side.
pub struct PolicyChooser {
    pub cfg: SearchConfig,
    pub rng: RngStream,
}

impl Chooser for PolicyChooser {
    fn choose(&mut self, known: &KnownTree, steps: &[StepRecord]) -> Result<String> {
        let state = SearchState::from_prefix(known, steps)?;
        let sel = state.sample(self.cfg.policy, self.cfg.rule, self.cfg.greedy_tie, &mut self.rng)?;
        Ok(known.state_name(sel.state).to_string())
    }
}

/// Samples from a constructed model's next-state distribution.
pub struct ModelChooser {
    pub model: HardAttnModel,
    pub rng: RngStream,
}

impl Chooser for ModelChooser {
    fn choose(&mut self, known: &KnownTree, steps: &[StepRecord]) -> Result<String> {
        let d = model_next_state(&self.model, steps, known)?;
        let mut u: f64 = self.rng.gen();
        let mut last = None;
        let atoms = d.support.iter().copied().zip(d.probs.iter().copied()).chain(d.revisits.iter().copied());
        for (s, p) in atoms {
            if p <= 0.0 {
                continue;
            }
            last = Some(s);
            if u < p {
                break;
            }
            u -= p;
        }
        let s = last.ok_or_else(|| Error::Protocol("model put no mass anywhere".into()))?;
        Ok(known.state_name(s).to_string())
    }
}

/// Replays fixed state names, one per selection.
pub struct ScriptChooser {
    pub names: Vec<String>,
    pub next: usize,
}

impl ScriptChooser {
    pub fn new(names: Vec<String>) -> Self {
        Self { names, next: 0 }
    }
}

impl Chooser for ScriptChooser {
    fn choose(&mut self, _: &KnownTree, _: &[StepRecord]) -> Result<String> {
        let name = self
            .names
            .get(self.next)
            .cloned()
            .ok_or_else(|| Error::Protocol("script ran out of selections".into()))?;
        self.next += 1;
        Ok(name)
    }
}

/// How a session ended from the agent's side.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSession {
    pub status: DoneStatus,
    pub selections: usize,
}

/// Plays one session as the agent.
pub fn run_agent(transport: &mut dyn Transport, chooser: &mut dyn Chooser) -> Result<AgentSession> {
    let (family, root) = match transport.recv()?.parse()? {
        ProtocolMessage::Init { family, root, .. } => (family, root),
        other => return Err(Error::Protocol(format!("expected INIT, got `{other}`"))),
    };
    let mut known = KnownTree::new(family, &root);
    let mut steps = Vec::new();
    loop {
        match transport.recv()?.parse()? {
            ProtocolMessage::Feedback {
                state,
                value,
                children,
            } => {
                let (s, kids) = known.reveal(&state, &children)?;
                steps.push(StepRecord {
                    state: s,
                    value,
                    children: kids,
                });
                let pick = chooser.choose(&known, &steps)?;
                transport.send(&ProtocolMessage::Select { state: pick }.to_string())?;
            }
            ProtocolMessage::Done { status } => {
                return Ok(AgentSession {
                    status,
                    selections: steps.len(),
                })
            }
            other => return Err(Error::Protocol(format!("unexpected `{other}`"))),
        }
    }
}

/// Starts an agent on a background thread that plays sessions until the
/// returned end is dropped. `make` builds a fresh chooser per session.
pub fn spawn_local_agent<F>(mut make: F, timeout: Duration) -> ChannelTransport
where
    F: FnMut(usize) -> Box<dyn Chooser> + Send + 'static,
{
    let (env_end, mut agent_end) = channel_pair(timeout);
    agent_end.set_timeout(Duration::MAX);
    thread::spawn(move || {
        let mut session = 0;
        loop {
            let mut chooser = make(session);
            match run_agent(&mut agent_end, chooser.as_mut()) {
                Err(Error::Closed) => return,
                // Anything else only ends this session; the environment
                // reports it on its side.
                _ => session += 1,
            }
        }
    });
    env_end
}
