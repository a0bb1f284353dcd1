use serde::{Deserialize, Serialize};
use treesearch::search::{PolicyKind, SuccessorRule};

use crate::error::{Error, Result};
use crate::fns::TokenFn;
use crate::layout::{Block, Layout};
use crate::token::ModelToken;

/// `M_{src -> dst}` scaled by `coef`. In Q and K, `dst` is a head
/// coordinate; in V it is a residual register.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Copy {
    pub src: usize,
    pub dst: usize,
    pub coef: f64,
}

pub fn copy(src: usize, dst: usize) -> Copy {
    Copy { src, dst, coef: 1.0 }
}

/// Causal single-head hard attention.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    pub head_dim: usize,
    pub q: Vec<Copy>,
    pub k: Vec<Copy>,
    pub v: Vec<Copy>,
}

impl Attention {
    /// Query `bias` against a single key register, copying with `v`.
    pub fn simple(bias: usize, key: Vec<Copy>, v: Vec<Copy>) -> Self {
        Self {
            head_dim: 1,
            q: vec![copy(bias, 0)],
            k: key,
            v,
        }
    }

    /// Every earlier position scores the same.
    pub fn flat(v: Vec<Copy>) -> Self {
        Self {
            head_dim: 0,
            q: Vec::new(),
            k: Vec::new(),
            v,
        }
    }

    pub fn none() -> Self {
        Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub attn: Attention,
    pub f: TokenFn,
}

/// Token embeddings: each token sets a few registers; the position is
/// added to `pos`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub pos: usize,
    pub markers: Vec<(ModelToken, Vec<(usize, f64)>)>,
    pub state: Vec<(usize, f64)>,
    pub state_id: Block,
    pub value: Vec<(usize, f64)>,
    pub value_reg: usize,
    /// The value register holds `value_offset + value_scale * hundredths`.
    pub value_scale: f64,
    pub value_offset: f64,
}

impl Embedding {
    pub fn embed(&self, tok: ModelToken, pos: usize, d: usize) -> Result<Vec<f64>> {
        let mut x = vec![0.0; d];
        match tok {
            ModelToken::State(k) => {
                let k = k as usize;
                if k >= self.state_id.len {
                    return Err(Error::Capacity {
                        needed: k + 1,
                        available: self.state_id.len,
                    });
                }
                for &(r, v) in &self.state {
                    x[r] = v;
                }
                x[self.state_id.at(k)] = 1.0;
            }
            ModelToken::Value(c) => {
                if c > 100 {
                    return Err(Error::UnknownToken(tok));
                }
                for &(r, v) in &self.value {
                    x[r] = v;
                }
                x[self.value_reg] = self.value_offset + self.value_scale * c as f64;
            }
            _ => {
                let regs = self
                    .markers
                    .iter()
                    .find(|m| m.0 == tok)
                    .ok_or(Error::UnknownToken(tok))?;
                for &(r, v) in &regs.1 {
                    x[r] = v;
                }
            }
        }
        x[self.pos] += pos as f64;
        Ok(x)
    }
}

/// Linear read-out: one row per output token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unembedding {
    pub rows: Vec<(ModelToken, Vec<(usize, f64)>)>,
}

impl Unembedding {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(_, row)| row.iter().map(|&(r, c)| c * x[r]).sum())
            .collect()
    }
}

/// Which search policy a model was built to execute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelKind {
    Leaf { policy: PolicyKind },
    Tree { policy: PolicyKind, rule: SuccessorRule },
}

impl ModelKind {
    pub fn policy(self) -> PolicyKind {
        match self {
            ModelKind::Leaf { policy } | ModelKind::Tree { policy, .. } => policy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardAttnModel {
    pub kind: ModelKind,
    /// Selection budget and branching factor the layout was sized for.
    pub budget: usize,
    pub branching: usize,
    pub layout: Layout,
    pub embedding: Embedding,
    pub layers: Vec<Layer>,
    pub unembedding: Unembedding,
}

/// Uniform over the maximal entries.
pub fn hardmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptyHardmax);
    }
    let best = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = z.iter().filter(|&&v| v == best).count() as f64;
    Ok(z.iter().map(|&v| if v == best { 1.0 / n } else { 0.0 }).collect())
}

/// Greedy decoding output: uniform over the tokens with maximal logit.
#[derive(Clone, Debug, PartialEq)]
pub struct NextTokenDistribution {
    pub support: Vec<ModelToken>,
    pub probs: Vec<f64>,
}

impl NextTokenDistribution {
    pub fn from_logits(rows: &[(ModelToken, Vec<(usize, f64)>)], logits: &[f64]) -> Result<Self> {
        let p = hardmax(logits)?;
        let (support, probs) = rows
            .iter()
            .zip(p)
            .filter(|(_, q)| *q > 0.0)
            .map(|(r, q)| (r.0, q))
            .unzip();
        Ok(Self { support, probs })
    }

    pub fn prob(&self, t: ModelToken) -> f64 {
        self.support
            .iter()
            .position(|&s| s == t)
            .map_or(0.0, |i| self.probs[i])
    }
}

/// Registers a layer touched and what it left behind, for one position.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub before: Vec<Vec<f64>>,
    pub after_attn: Vec<Vec<f64>>,
    pub after: Vec<Vec<f64>>,
}

impl HardAttnModel {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Number of state tokens the layout can address.
    pub fn state_capacity(&self) -> usize {
        self.embedding.state_id.len
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        m.layout.reindex()?;
        m.validate()?;
        Ok(m)
    }

    /// Structural checks: copy entries inside bounds with coefficients ±1.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for l in &self.layers {
            let a = &l.attn;
            let head = a.q.iter().chain(&a.k);
            for c in head {
                if c.src >= d || c.dst >= a.head_dim {
                    return Err(Error::Malformed(format!("{}: Q/K entry out of range", l.name)));
                }
            }
            for c in &a.v {
                if c.src >= d || c.dst >= d {
                    return Err(Error::Malformed(format!("{}: V entry out of range", l.name)));
                }
            }
            if a.q.iter().chain(&a.k).chain(&a.v).any(|c| c.coef.abs() != 1.0) {
                return Err(Error::Malformed(format!("{}: coefficient other than ±1", l.name)));
            }
            if l.f.writes().iter().any(|&r| r >= d) {
                return Err(Error::Malformed(format!("{}: token function out of range", l.name)));
            }
        }
        Ok(())
    }

    /// Registers a layer may change: V destinations and the token
    /// function's outputs.
    pub fn write_set(&self, layer: usize) -> Vec<usize> {
        let l = &self.layers[layer];
        let mut w: Vec<usize> = l.attn.v.iter().map(|c| c.dst).collect();
        w.extend(l.f.writes());
        w.sort_unstable();
        w.dedup();
        w
    }

    pub fn embed_all(&self, tokens: &[ModelToken]) -> Result<Vec<Vec<f64>>> {
        tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| self.embedding.embed(t, i, self.dim()))
            .collect()
    }

    /// Whole-sequence forward pass, layer by layer, keeping every
    /// intermediate residual.
    pub fn forward_traced(&self, tokens: &[ModelToken]) -> Result<Vec<LayerTrace>> {
        let mut x = self.embed_all(tokens)?;
        let mut out = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let before = x.clone();
            let a = &l.attn;
            let qs: Vec<Vec<f64>> = x.iter().map(|r| project(&a.q, a.head_dim, r)).collect();
            let ks: Vec<Vec<f64>> = x.iter().map(|r| project(&a.k, a.head_dim, r)).collect();
            let mut after_attn = x.clone();
            for i in 0..x.len() {
                let scores: Vec<f64> = (0..=i).map(|j| dot(&qs[i], &ks[j])).collect();
                let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let chosen: Vec<usize> = (0..=i).filter(|&j| scores[j] == best).collect();
                let mut acc = vec![0.0; self.dim()];
                for &j in &chosen {
                    for c in &a.v {
                        acc[c.dst] += c.coef * x[j][c.src];
                    }
                }
                for c in &a.v {
                    after_attn[i][c.dst] = x[i][c.dst] + acc[c.dst] / chosen.len() as f64;
                }
            }
            let mut after = after_attn.clone();
            for row in after.iter_mut() {
                l.f.apply(row);
            }
            x = after.clone();
            out.push(LayerTrace {
                before,
                after_attn,
                after,
            });
        }
        Ok(out)
    }

    /// Next-token distribution at the last position, computed without
    /// caches.
    pub fn next_token(&self, tokens: &[ModelToken]) -> Result<NextTokenDistribution> {
        let trace = self.forward_traced(tokens)?;
        let last = match trace.last() {
            Some(t) => t.after.last().cloned(),
            None => self.embed_all(tokens)?.last().cloned(),
        }
        .ok_or_else(|| Error::Malformed("empty input".into()))?;
        let logits = self.unembedding.logits(&last);
        NextTokenDistribution::from_logits(&self.unembedding.rows, &logits)
    }
}

pub(crate) fn project(entries: &[Copy], dim: usize, x: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; dim];
    for c in entries {
        h[c.dst] += c.coef * x[c.src];
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
