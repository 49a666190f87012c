//! Portable seeded randomness.
//!
//! SplitMix64 has published reference outputs, and the bounded draw below is
//! plain rejection sampling, so a seed selects the same records in any
//! implementation that follows the same steps.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct SeededRng(SplitMix64);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, bound)`.
    ///
    /// # Panics
    /// When `bound == 0`.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "empty range");
        let bound = bound as u64;
        // Largest accepted draw; everything above it would bias the modulo.
        let accept_max = u64::MAX - (u64::MAX % bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= accept_max {
                return (x % bound) as usize;
            }
        }
    }

    /// `k` distinct positions out of `0..len`, by partial Fisher-Yates, in draw order.
    pub fn choose_k(&mut self, len: usize, k: usize) -> Vec<usize> {
        assert!(k <= len);
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = i + self.below(len - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
