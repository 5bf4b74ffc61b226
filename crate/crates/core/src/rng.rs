//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. [`GcpRng`] wraps a
//! ChaCha counter-based generator and derives independent child streams by
//! hashing the parent seed together with a label, so one top-level seed
//! reproduces a whole experiment regardless of the order children are used.

use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::tensor::Shape;

#[derive(Clone, Debug)]
pub struct GcpRng {
    seed: [u8; 32],
    inner: ChaCha8Rng,
}

impl GcpRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self::from_seed_bytes(hash_parts(b"gcp-root", &seed.to_le_bytes()))
    }

    fn from_seed_bytes(seed: [u8; 32]) -> Self {
        GcpRng {
            seed,
            inner: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Independent child stream named by `label`. Does not advance `self`.
    pub fn split(&self, label: &str) -> GcpRng {
        Self::from_seed_bytes(hash_parts(&self.seed, label.as_bytes()))
    }

    /// The `index`th member of a labeled family of streams.
    pub fn stream(&self, label: &str, index: u64) -> GcpRng {
        let mut tag = label.as_bytes().to_vec();
        tag.push(0);
        tag.extend_from_slice(&index.to_le_bytes());
        Self::from_seed_bytes(hash_parts(&self.seed, &tag))
    }
}

fn hash_parts(a: &[u8], b: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((a.len() as u64).to_le_bytes());
    h.update(a);
    h.update(b);
    h.finalize().into()
}

impl RngCore for GcpRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Source of uniform integer draws, the `randi` primitive of the samplers.
pub trait IndexSource {
    /// Uniform integer in `0..n`; `n` is at least 1.
    fn below(&mut self, n: usize) -> usize;
}

impl<R: Rng + ?Sized> IndexSource for R {
    #[inline]
    fn below(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }
}

/// Replays a fixed sequence of draws. Used to force exhaustive coverage of an
/// index space in tests and oracles.
#[derive(Clone, Debug, Default)]
pub struct ScriptedIndices {
    draws: VecDeque<usize>,
}

impl ScriptedIndices {
    pub fn new(draws: impl IntoIterator<Item = usize>) -> Self {
        ScriptedIndices {
            draws: draws.into_iter().collect(),
        }
    }

    /// Per-mode draws that visit every multi-index of `shape` once, in
    /// linear order.
    pub fn enumerate_all(shape: &Shape) -> Self {
        let d = shape.ndims();
        let mut coords = vec![0; d];
        let mut draws = Vec::with_capacity(shape.total() as usize * d);
        for _ in 0..shape.total() {
            draws.extend_from_slice(&coords);
            crate::tensor::advance(&mut coords, shape.dims());
        }
        Self::new(draws)
    }

    pub fn push(&mut self, draws: impl IntoIterator<Item = usize>) {
        self.draws.extend(draws);
    }

    pub fn into_draws(self) -> Vec<usize> {
        self.draws.into()
    }

    pub fn remaining(&self) -> usize {
        self.draws.len()
    }
}

impl IndexSource for ScriptedIndices {
    fn below(&mut self, n: usize) -> usize {
        let v = self.draws.pop_front().expect("scripted draws exhausted");
        assert!(v < n, "scripted draw {v} not below {n}");
        v
    }
}
