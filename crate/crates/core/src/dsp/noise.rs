//! Seeded Gaussian noise.
//!
//! Generator: xoshiro256** seeded from a `u64` through SplitMix64 (the
//! reference `seed_from_u64` expansion). Normal deviates use the Box–Muller
//! transform on pairs of 53-bit uniforms:
//!
//! ```text
//! u1 = ((next_u64() >> 11) + 1) · 2⁻⁵³      ∈ (0, 1]
//! u2 =  (next_u64() >> 11)      · 2⁻⁵³      ∈ [0, 1)
//! z0 = √(−2 ln u1) · cos(2π u2)
//! z1 = √(−2 ln u1) · sin(2π u2)
//! ```
//!
//! `z0` is returned first, then `z1`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use super::{SignalBuffer, SAMPLE_RATE};

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: Xoshiro256StarStar::seed_from_u64(seed),
            spare: None,
        }
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform integer in `0..n` (`n ≥ 1`), by multiply-shift.
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n >= 1);
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn take(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_normal()).collect()
    }
}

/// `n` i.i.d. standard normal samples at the crate sample rate.
pub fn white_noise(seed: u64, n: usize) -> SignalBuffer {
    let samples = NormalStream::new(seed).take(n);
    SignalBuffer::new(samples, SAMPLE_RATE).expect("Box-Muller output is finite")
}

/// Derives an independent stream seed from a root seed and a stream tag:
/// one SplitMix64 finalizer round over `root ^ (tag · 0x9E3779B97F4A7C15)`.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
