use crate::error::{Error, Result};
use crate::model::{project, HardAttnModel, NextTokenDistribution};
use crate::token::ModelToken;

#[derive(Clone, Default)]
struct LayerCache {
    keys: Vec<Vec<(usize, f64)>>,
    values: Vec<Vec<(usize, f64)>>,
}

/// Incremental decoding state: per-layer keys and values of every position
/// so far, so pushing a token costs one pass over the cache per layer.
#[derive(Clone)]
pub struct Session<'m> {
    model: &'m HardAttnModel,
    tokens: Vec<ModelToken>,
    caches: Vec<LayerCache>,
    finals: Vec<Vec<f64>>,
}

fn sparse(h: Vec<f64>) -> Vec<(usize, f64)> {
    h.into_iter().enumerate().filter(|&(_, v)| v != 0.0).collect()
}

impl<'m> Session<'m> {
    pub fn new(model: &'m HardAttnModel) -> Self {
        Self {
            model,
            tokens: Vec::new(),
            caches: vec![LayerCache::default(); model.layers.len()],
            finals: Vec::new(),
        }
    }

    pub fn tokens(&self) -> &[ModelToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn push(&mut self, tok: ModelToken) -> Result<()> {
        let m = self.model;
        let d = m.dim();
        let i = self.tokens.len();
        let mut x = m.embedding.embed(tok, i, d)?;
        for (l, layer) in m.layers.iter().enumerate() {
            let a = &layer.attn;
            let q = project(&a.q, a.head_dim, &x);
            let k = sparse(project(&a.k, a.head_dim, &x));
            let mut v = Vec::with_capacity(a.v.len());
            for c in &a.v {
                let val = c.coef * x[c.src];
                if val != 0.0 {
                    v.push((c.dst, val));
                }
            }
            let cache = &mut self.caches[l];
            cache.keys.push(k);
            cache.values.push(v);
            let mut best = f64::NEG_INFINITY;
            let mut chosen: Vec<usize> = Vec::new();
            for (j, kj) in cache.keys.iter().enumerate() {
                let s: f64 = kj.iter().map(|&(h, kv)| q[h] * kv).sum();
                if s > best {
                    best = s;
                    chosen.clear();
                    chosen.push(j);
                } else if s == best {
                    chosen.push(j);
                }
            }
            if !a.v.is_empty() {
                let mut acc = vec![0.0; d];
                for &j in &chosen {
                    for &(dst, val) in &cache.values[j] {
                        acc[dst] += val;
                    }
                }
                let n = chosen.len() as f64;
                let mut seen = vec![false; d];
                for c in &a.v {
                    if !seen[c.dst] {
                        seen[c.dst] = true;
                        x[c.dst] += acc[c.dst] / n;
                    }
                }
            }
            layer.f.apply(&mut x);
        }
        self.tokens.push(tok);
        self.finals.push(x);
        Ok(())
    }

    pub fn push_all(&mut self, toks: &[ModelToken]) -> Result<()> {
        toks.iter().try_for_each(|&t| self.push(t))
    }

    pub fn pop(&mut self) -> Option<ModelToken> {
        let t = self.tokens.pop()?;
        for c in &mut self.caches {
            c.keys.pop();
            c.values.pop();
        }
        self.finals.pop();
        Some(t)
    }

    /// Final residual of the last position.
    pub fn last_state(&self) -> Option<&[f64]> {
        self.finals.last().map(|v| v.as_slice())
    }

    pub fn next_token(&self) -> Result<NextTokenDistribution> {
        let x = self
            .last_state()
            .ok_or_else(|| Error::Malformed("no tokens pushed".into()))?;
        let logits = self.model.unembedding.logits(x);
        NextTokenDistribution::from_logits(&self.model.unembedding.rows, &logits)
    }
}
