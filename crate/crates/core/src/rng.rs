//! The simulator's single random source.
//!
//! Draws come from ChaCha8 seeded with a 64-bit seed; every derived
//! distribution (uniform floats, indices, Gaussians) is defined here on top of
//! raw `u64` output so the sequence is identical on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Name of the generator algorithm, recorded in episode log headers.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for a sub-system, derived from a base seed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        if hi <= lo {
            return lo;
        }
        lo + self.index((hi - lo) as usize + 1) as u32
    }

    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw (Box-Muller, one value per two uniforms).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    #[inline]
    pub fn gaussian(&mut self, mean: f64, std_dev: f64) -> f64 {
        if std_dev == 0.0 {
            return mean;
        }
        mean + std_dev * self.standard_normal()
    }

    /// Gaussian truncated to `mean ± width·std_dev` by rejection; falls back
    /// to the mean after 64 rejected draws.
    pub fn truncated_gaussian(&mut self, mean: f64, std_dev: f64, width: f64) -> f64 {
        if std_dev == 0.0 {
            return mean;
        }
        for _ in 0..64 {
            let z = self.standard_normal();
            if z.abs() <= width {
                return mean + std_dev * z;
            }
        }
        mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_million_draws() {
        let mut a = Rng::seed_from_u64(0xDEAD_BEEF);
        let mut b = Rng::seed_from_u64(0xDEAD_BEEF);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn known_first_draw_is_stable() {
        // Frozen from the first run; guards against silent algorithm changes.
        let mut r = Rng::seed_from_u64(42);
        let first = r.next_u64();
        assert_eq!(first, 12_578_764_544_318_200_737);
        assert_ne!(Rng::seed_from_u64(43).next_u64(), first);
    }

    #[test]
    fn uniform_and_index_bounds() {
        let mut r = Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.index(7) < 7);
            let k = r.int_inclusive(3, 5);
            assert!((3..=5).contains(&k));
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut r = Rng::seed_from_u64(9);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = r.gaussian(2.0, 0.5);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 2.0).abs() < 0.01);
        assert!((var - 0.25).abs() < 0.01);
    }

    #[test]
    fn truncation_respected() {
        let mut r = Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x = r.truncated_gaussian(1.0, 0.1, 2.0);
            assert!((x - 1.0).abs() <= 0.2 + 1e-15);
        }
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = Rng::derive(5, 0);
        let mut b = Rng::derive(5, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
