use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{StateId, Trajectory};
use crate::error::{Error, Result};

/// Token of the symbolic formats. States are numbered `S_0, S_1, ...` in
/// order of first appearance; values are carried as real numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SymToken {
    Query,
    Percent,
    Hash,
    Bos,
    Gt,
    State(u32),
    Value(f64),
}

impl fmt::Display for SymToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymToken::Query => f.write_str("?"),
            SymToken::Percent => f.write_str("%"),
            SymToken::Hash => f.write_str("#"),
            SymToken::Bos => f.write_str("[BOS]"),
            SymToken::Gt => f.write_str(">"),
            SymToken::State(k) => write!(f, "S_{k}"),
            SymToken::Value(v) => write!(f, "V_{v:.2}"),
        }
    }
}

/// Assigns token numbers to states by first appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateNumbering {
    ids: HashMap<StateId, u32>,
    states: Vec<StateId>,
}

impl StateNumbering {
    pub fn number(&mut self, s: StateId) -> u32 {
        if let Some(&k) = self.ids.get(&s) {
            return k;
        }
        let k = self.states.len() as u32;
        self.ids.insert(s, k);
        self.states.push(s);
        k
    }

    pub fn get(&self, s: StateId) -> Option<u32> {
        self.ids.get(&s).copied()
    }

    pub fn state(&self, k: u32) -> Option<StateId> {
        self.states.get(k as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymTrace {
    pub tokens: Vec<SymToken>,
    pub numbering: StateNumbering,
}

impl SymTrace {
    pub fn render(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn push_state(&mut self, s: StateId) {
        let k = self.numbering.number(s);
        self.tokens.push(SymToken::State(k));
    }

    fn push_tail(&mut self, value: f64, children: &[StateId]) {
        self.tokens.push(SymToken::Percent);
        self.tokens.push(SymToken::Value(value));
        self.tokens.push(SymToken::Hash);
        for &c in children {
            self.push_state(c);
        }
    }
}

/// `? S % V # children` for every step, root included.
pub fn encode_leaf_theoretical(t: &Trajectory) -> SymTrace {
    let mut out = SymTrace::default();
    for step in &t.steps {
        out.tokens.push(SymToken::Query);
        out.push_state(step.state);
        out.push_tail(step.value, &step.children);
    }
    out
}

/// `[BOS]`, then `? path % V # children` per step where the path lists the
/// walk from the root to the selected state, separated by `>`.
pub fn encode_tree_theoretical(t: &Trajectory, paths: &[Vec<StateId>]) -> Result<SymTrace> {
    if paths.len() != t.steps.len() {
        return Err(Error::Structure(format!(
            "{} paths for {} steps",
            paths.len(),
            t.steps.len()
        )));
    }
    let mut out = SymTrace::default();
    out.tokens.push(SymToken::Bos);
    for (i, (step, path)) in t.steps.iter().zip(paths).enumerate() {
        if path.last() != Some(&step.state) {
            return Err(Error::Structure(format!(
                "step {i}: path does not end at the selected state"
            )));
        }
        out.tokens.push(SymToken::Query);
        for (j, &s) in path.iter().enumerate() {
            if j > 0 {
                out.tokens.push(SymToken::Gt);
            }
            out.push_state(s);
        }
        out.push_tail(step.value, &step.children);
    }
    Ok(out)
}
