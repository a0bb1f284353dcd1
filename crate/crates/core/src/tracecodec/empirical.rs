use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Family, Frontier, StateId, StepRecord, Trajectory, TreeEnv};
use crate::envs::centi;
use crate::error::{Error, Result};

use super::TraceFormat;

const START: &str = "start_of_iteration";
const SELECTED: &str = "selected_child_and_then_reward";

/// One whitespace-level token of the empirical format. Navigation state
/// names are further split at `>` so each cell is its own token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    StartOfIteration,
    SelectedChild,
    Index(usize),
    State(String),
    PathSep,
    /// Value in hundredths, 0..=100.
    Value(u8),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::StartOfIteration => f.write_str(START),
            Token::SelectedChild => f.write_str(SELECTED),
            Token::Index(i) => write!(f, "{i}"),
            Token::State(s) => f.write_str(s),
            Token::PathSep => f.write_str(">"),
            Token::Value(c) => write!(f, "{}.{:02}", c / 100, c % 100),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub format: TraceFormat,
    pub tokens: Vec<Token>,
}

impl TraceRecord {
    /// Text layout: the iteration marker, the frontier and the selection
    /// each on one line, then the value on its own line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line: Vec<String> = Vec::new();
        let mut glue = false;
        let flush = |line: &mut Vec<String>, out: &mut String| {
            if !line.is_empty() {
                out.push_str(&line.join(" "));
                out.push('\n');
                line.clear();
            }
        };
        for tok in &self.tokens {
            match tok {
                Token::StartOfIteration => {
                    flush(&mut line, &mut out);
                    out.push_str(START);
                    out.push('\n');
                }
                Token::SelectedChild => {
                    flush(&mut line, &mut out);
                    line.push(SELECTED.to_string());
                }
                Token::Value(_) => {
                    flush(&mut line, &mut out);
                    out.push_str(&tok.to_string());
                    out.push('\n');
                }
                Token::PathSep => {
                    if let Some(last) = line.last_mut() {
                        last.push('>');
                    }
                    glue = true;
                    continue;
                }
                Token::State(s) if glue => {
                    if let Some(last) = line.last_mut() {
                        last.push_str(s);
                    }
                }
                other => line.push(other.to_string()),
            }
            glue = false;
        }
        flush(&mut line, &mut out);
        out
    }

    /// Token strings in order, as used for vocabulary lookup.
    pub fn words(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_string()).collect()
    }
}

fn state_tokens(name: &str, family: Family, out: &mut Vec<Token>) {
    match family {
        Family::Tree => out.push(Token::State(name.to_string())),
        Family::Nav => {
            for (i, part) in name.split('>').enumerate() {
                if i > 0 {
                    out.push(Token::PathSep);
                }
                out.push(Token::State(part.to_string()));
            }
        }
    }
}

fn format_of(family: Family) -> TraceFormat {
    match family {
        Family::Tree => TraceFormat::EmpiricalTree,
        Family::Nav => TraceFormat::EmpiricalNav,
    }
}

fn value_token(v: f64) -> Result<Token> {
    let c = centi(v);
    if !(0..=100).contains(&c) {
        return Err(Error::Structure(format!("value {v} outside [0,1]")));
    }
    Ok(Token::Value(c as u8))
}

/// Encodes every selection after the root: the frontier at that point,
/// the chosen index and the observed value rounded to two decimals.
pub fn encode_empirical(t: &Trajectory, tree: &dyn TreeEnv) -> Result<TraceRecord> {
    let first = t
        .steps
        .first()
        .ok_or_else(|| Error::Structure("empty trajectory".into()))?;
    let family = tree.family();
    let mut frontier = Frontier::default();
    for &c in &first.children {
        frontier.push(c, first.state);
    }
    let mut tokens = Vec::new();
    for (i, step) in t.steps.iter().enumerate().skip(1) {
        let k = frontier.index_of(step.state).ok_or_else(|| {
            Error::Structure(format!("step {i}: {} is not in the frontier", step.state))
        })?;
        tokens.push(Token::StartOfIteration);
        for (j, &m) in frontier.members().iter().enumerate() {
            tokens.push(Token::Index(j));
            state_tokens(&tree.name(m), family, &mut tokens);
        }
        tokens.push(Token::SelectedChild);
        tokens.push(Token::Index(k));
        tokens.push(value_token(step.value)?);
        frontier.remove(step.state);
        for &c in &step.children {
            frontier.push(c, step.state);
        }
    }
    Ok(TraceRecord {
        format: format_of(family),
        tokens,
    })
}

fn is_value_word(w: &str) -> bool {
    let b = w.as_bytes();
    b.len() == 4 && b[0].is_ascii_digit() && b[1] == b'.' && b[2].is_ascii_digit() && b[3].is_ascii_digit()
}

/// Splits rendered text back into tokens.
pub fn parse_empirical(text: &str, family: Family) -> Result<TraceRecord> {
    let mut tokens = Vec::new();
    for w in text.split_whitespace() {
        match w {
            START => tokens.push(Token::StartOfIteration),
            SELECTED => tokens.push(Token::SelectedChild),
            _ if w.bytes().all(|b| b.is_ascii_digit()) => {
                let i = w.parse().map_err(|_| Error::UnknownToken(w.to_string()))?;
                tokens.push(Token::Index(i));
            }
            _ if is_value_word(w) => {
                let c = w[0..1].parse::<u32>().unwrap() * 100 + w[2..4].parse::<u32>().unwrap();
                if c > 100 {
                    return Err(Error::OffGrid(w.to_string()));
                }
                tokens.push(Token::Value(c as u8));
            }
            _ if w.contains('.') => return Err(Error::OffGrid(w.to_string())),
            _ => state_tokens(w, family, &mut tokens),
        }
    }
    Ok(TraceRecord {
        format: format_of(family),
        tokens,
    })
}

struct Cursor<'r> {
    tokens: &'r [Token],
    pos: usize,
    iteration: usize,
}

impl<'r> Cursor<'r> {
    fn peek(&self) -> Option<&'r Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, what: &str) -> Result<&'r Token> {
        let t = self.tokens.get(self.pos).ok_or_else(|| Error::Parse {
            iteration: self.iteration,
            msg: format!("record ends where {what} was expected"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn fail(&self, msg: String) -> Error {
        Error::Parse {
            iteration: self.iteration,
            msg,
        }
    }

    // A state name, re-joined across `>` tokens.
    fn state(&mut self) -> Result<String> {
        let mut name = match self.next("a state")? {
            Token::State(s) => s.clone(),
            other => return Err(self.fail(format!("expected a state, found `{other}`"))),
        };
        while let Some(Token::PathSep) = self.peek() {
            self.pos += 1;
            match self.next("a state after `>`")? {
                Token::State(s) => {
                    name.push('>');
                    name.push_str(s);
                }
                other => return Err(self.fail(format!("expected a state after `>`, found `{other}`"))),
            }
        }
        Ok(name)
    }
}

/// Rebuilds the trajectory. The format does not carry the root's own value,
/// so the root step gets value 0.
pub fn decode_empirical(rec: &TraceRecord, tree: &dyn TreeEnv) -> Result<Trajectory> {
    let root = tree.root();
    let mut steps = vec![StepRecord {
        state: root,
        value: 0.0,
        children: tree.children(root),
    }];
    let mut frontier = Frontier::default();
    for c in tree.children(root) {
        frontier.push(c, root);
    }
    let mut cur = Cursor {
        tokens: &rec.tokens,
        pos: 0,
        iteration: 0,
    };
    while cur.peek().is_some() {
        cur.iteration += 1;
        match cur.next("start_of_iteration")? {
            Token::StartOfIteration => {}
            other => return Err(cur.fail(format!("expected `{START}`, found `{other}`"))),
        }
        let mut listed: Vec<String> = Vec::new();
        loop {
            match cur.next("a frontier entry or the selection marker")? {
                Token::SelectedChild => break,
                Token::Index(i) if *i == listed.len() => listed.push(cur.state()?),
                other => return Err(cur.fail(format!("unexpected `{other}` in the frontier listing"))),
            }
        }
        let k = match cur.next("the selected index")? {
            Token::Index(k) => *k,
            other => return Err(cur.fail(format!("expected an index, found `{other}`"))),
        };
        let value = match cur.next("the value")? {
            Token::Value(c) => *c as f64 / 100.0,
            other => return Err(cur.fail(format!("expected a value, found `{other}`"))),
        };
        if k >= listed.len() {
            return Err(Error::IndexRange {
                iteration: cur.iteration,
                index: k,
                len: listed.len(),
            });
        }
        let members: Vec<StateId> = frontier.members().to_vec();
        if listed.len() != members.len() {
            return Err(cur.fail(format!(
                "listed {} frontier states, expected {}",
                listed.len(),
                members.len()
            )));
        }
        for (name, &m) in listed.iter().zip(&members) {
            if *name != tree.name(m) {
                if tree.lookup(name).is_none() {
                    return Err(Error::UnknownToken(name.clone()));
                }
                return Err(cur.fail(format!("frontier entry `{name}` out of order")));
            }
        }
        let s = members[k];
        frontier.remove(s);
        let children = tree.children(s);
        for &c in &children {
            frontier.push(c, s);
        }
        steps.push(StepRecord {
            state: s,
            value,
            children,
        });
    }
    Ok(Trajectory::new(steps))
}
