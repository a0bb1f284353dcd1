use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous run of registers, one per state number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn at(self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.start + i
    }

    pub fn range(self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Named coordinates of the residual stream. Every coordinate has exactly
/// one name, so registers are disjoint and cover the embedding.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Layout {
    pub fn scalar(&mut self, name: &str) -> usize {
        assert!(!self.index.contains_key(name), "register {name} declared twice");
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    /// Registers `name_0 .. name_{len-1}`.
    pub fn block(&mut self, name: &str, len: usize) -> Block {
        let start = self.names.len();
        for i in 0..len {
            self.scalar(&format!("{name}_{i}"));
        }
        Block { start, len }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub(crate) fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, n) in self.names.iter().enumerate() {
            if self.index.insert(n.clone(), i).is_some() {
                return Err(Error::Malformed(format!("register {n} declared twice")));
            }
        }
        Ok(())
    }
}
