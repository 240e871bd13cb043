//! Project random number generator.
//!
//! Every random draw in the crate goes through [`Rng`], a thin wrapper around
//! ChaCha8 (`rand_chacha`). ChaCha is a counter-based stream cipher: a 64-bit
//! seed plus a 64-bit stream id select an independent, platform-independent
//! sequence. Named sub-streams (`"split"`, `"init"`, `"dropout"`, `"gibbs"`,
//! ...) hash their name into the stream id, so components seeded from the same
//! run seed never share draws.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for a named component of a run.
    pub fn substream(seed: u64, name: &str) -> Self {
        Self::indexed(seed, name, &[])
    }

    /// Independent generator for a named component and a tuple of indices,
    /// e.g. `("dropout", [epoch, sample])`. Lets per-sample randomness be drawn
    /// in any order (or in parallel) without changing the values.
    pub fn indexed(seed: u64, name: &str, indices: &[u64]) -> Self {
        let mut h = fnv1a(name.bytes(), FNV_OFFSET);
        for i in indices {
            h = fnv1a(i.to_le_bytes(), h);
        }
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(h);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }
}
