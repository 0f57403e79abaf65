//! Seeded sampling that is reproducible across implementations.
//!
//! The generator is ChaCha20 keyed through `SeedableRng::seed_from_u64`.
//! Bounded integers use rejection sampling on raw 64-bit outputs and shuffles
//! are descending Fisher–Yates, so the byte stream fully determines every
//! queue independently of any library's sampling helpers.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier written into log headers.
pub const RNG_NAME: &str = "chacha20/fisher-yates/v1";

pub struct PortableRng(ChaCha20Rng);

impl PortableRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
        loop {
            let x = self.0.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// In-place uniform shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            idx.swap(i, j);
        }
        idx.truncate(k);
        idx
    }
}
