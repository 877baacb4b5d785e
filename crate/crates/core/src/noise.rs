//! Seeded Brownian increments.
//!
//! Every realization owns an independent ChaCha8 stream selected by
//! `(seed, realization_index)`, so results never depend on the order in which
//! realizations are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Infinite stream of i.i.d. `N(0, dt)` increments.
#[derive(Debug, Clone)]
pub struct IncrementStream {
    rng: ChaCha8Rng,
    sqrt_dt: f64,
    substeps: u32,
}

impl IncrementStream {
    pub fn new(seed: u64, realization_index: u64, dt: f64) -> Self {
        Self::coarsened(seed, realization_index, dt, 1)
    }

    /// Each increment is the sum of `factor` consecutive increments of the
    /// fine stream with step `fine_dt`, i.e. the same Brownian path sampled
    /// on a grid `factor` times coarser.
    pub fn coarsened(seed: u64, realization_index: u64, fine_dt: f64, factor: u32) -> Self {
        assert!(factor >= 1, "coarsening factor must be >= 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization_index);
        IncrementStream { rng, sqrt_dt: fine_dt.sqrt(), substeps: factor }
    }

    #[inline]
    pub fn next_increment(&mut self) -> f64 {
        let mut sum = 0.0;
        for _ in 0..self.substeps {
            let z: f64 = self.rng.sample(StandardNormal);
            sum += z;
        }
        sum * self.sqrt_dt
    }
}

impl Iterator for IncrementStream {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        Some(self.next_increment())
    }
}

pub fn gaussian_increments(seed: u64, realization_index: u64, count: usize, dt: f64) -> Vec<f64> {
    IncrementStream::new(seed, realization_index, dt).take(count).collect()
}
