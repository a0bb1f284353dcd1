//! Named, splittable random streams.
//!
//! A stream is keyed by a 64-bit seed and a label. The key is hashed into a
//! ChaCha8 seed, so the same (seed, label) pair yields the same draws on any
//! platform. Child streams are derived by extending the label, which keeps
//! (instance, trace) pairs independent without sharing a generator.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&hasher.finalize());
        Self {
            seed,
            label,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream. Independent of how many draws were taken from `self`.
    pub fn derive(&self, part: &str) -> Self {
        Self::new(self.seed, format!("{}/{}", self.label, part))
    }

    pub fn derive_index(&self, part: &str, index: u64) -> Self {
        Self::new(self.seed, format!("{}/{}#{}", self.label, part, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        pick(self, n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Uniform index in `0..n`, drawn through `u64` so results do not depend on
/// the platform's pointer width.
pub fn pick<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "pick from an empty range");
    rng.gen_range(0..n as u64) as usize
}

/// In-place partial Fisher-Yates: the first `k` entries become a uniform
/// random ordered sample without replacement.
pub fn partial_shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T], k: usize) {
    let n = items.len();
    for i in 0..k.min(n) {
        let j = i + pick(rng, n - i);
        items.swap(i, j);
    }
}
