//! Seeded random streams for the synthetic generators.
//!
//! The stream is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). Uniforms
//! take the top 53 bits of each `u64` draw, `u = (x >> 11) · 2⁻⁵³`. Standard
//! normals use the basic Box–Muller transform on two consecutive uniforms,
//! `sqrt(-2 ln(1 - u₁)) · cos(2π u₂)`, emitting only the cosine branch, so
//! every normal consumes exactly two `u64` draws. Same seed, same stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct NoiseStream {
    inner: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}
