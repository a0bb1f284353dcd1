use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::envs::cell_name;
use crate::error::{Error, Result};

use super::{Token, TraceFormat};

/// Bijection between token strings and integer ids. Built from the family
/// parameters alone, so two corpora of the same family share ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub format: TraceFormat,
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    fn build(format: TraceFormat, tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            format,
            tokens,
            index,
        }
    }

    fn common(max_index: usize) -> Vec<String> {
        let mut t = vec![
            Token::StartOfIteration.to_string(),
            Token::SelectedChild.to_string(),
        ];
        t.extend((0..max_index).map(|i| Token::Index(i).to_string()));
        t.extend((0..=100u8).map(|c| Token::Value(c).to_string()));
        t
    }

    /// Markers, indices `0..max_index`, the 101 value tokens, and the name
    /// of every state of a perfect `b`-ary tree of depth `d`.
    pub fn empirical_tree(b: usize, d: usize, max_index: usize) -> Self {
        let mut t = Self::common(max_index);
        let mut level = vec!["r0d0".to_string()];
        t.push(level[0].clone());
        for depth in 1..=d {
            let mut next = Vec::with_capacity(level.len() * b);
            for p in &level {
                for i in 0..b {
                    next.push(format!("{p}>i{i}d{depth}"));
                }
            }
            t.extend(next.iter().cloned());
            level = next;
        }
        Self::build(TraceFormat::EmpiricalTree, t)
    }

    /// Markers, `>`, indices, values and one token per grid cell.
    pub fn empirical_nav(width: usize, height: usize, max_index: usize) -> Self {
        let mut t = Self::common(max_index);
        t.push(Token::PathSep.to_string());
        for y in 0..height {
            for x in 0..width {
                t.push(cell_name((x, y)));
            }
        }
        Self::build(TraceFormat::EmpiricalNav, t)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, words: &[String]) -> Result<Vec<u32>> {
        words
            .iter()
            .map(|w| self.id(w).ok_or_else(|| Error::UnknownToken(w.clone())))
            .collect()
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(mut self) -> Self {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        self
    }
}
