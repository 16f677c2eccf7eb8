//! Deterministic random streams.
//!
//! All sampling in this crate goes through [`Stream`], which owns a ChaCha8
//! generator and maps raw 64-bit words to floats in-code. This keeps sampled
//! values stable across library upgrades: the only moving part is the ChaCha8
//! keystream itself, which is a fixed algorithm.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 finalizer. Used to derive independent seeds from a master seed.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed for realization `index` of sweep point `gamma_index`.
///
/// The chain is keyed so that adding realizations or sweep points never
/// perturbs seeds already handed out.
pub fn realization_seed(master: u64, gamma_index: usize, index: usize) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (gamma_index as u64).wrapping_mul(0x9E3779B97F4A7C15));
    splitmix64(b ^ (index as u64).wrapping_mul(0xBF58476D1CE4E5B9))
}

/// Deterministic sample stream.
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    /// Uniform integer in [0, bound) by rejection-free 128-bit scaling.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}
