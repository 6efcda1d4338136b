//! Deterministic signal primitives shared by the controller, the meta
//! trainer and the experiment harness.
//!
//! Everything here runs at a fixed sample rate ([`SAMPLE_RATE`]); no
//! resampling is done anywhere in the crate.

mod bandpass;
mod delay;
mod ema;
mod fir;
mod noise;

pub use bandpass::{band_limit, bandpass_taps, BANDPASS_ORDER};
pub use delay::DelayLine;
pub use ema::EmaPower;
pub use fir::{convolve_causal, dot, fir_apply, FirFilter};
pub use noise::{derive_seed, white_noise, NormalStream};

use crate::error::{Error, Result};

/// Processing rate for every signal and path, in Hz.
pub const SAMPLE_RATE: f64 = 16_000.0;

/// A finite, real-valued sequence at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl SignalBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::contract(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite sample at index {i}")));
        }
        Ok(SignalBuffer { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Root-mean-square amplitude; zero for an empty buffer.
    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Power in dB with the crate-wide floor for exact zeros.
pub fn power_db(mean_square: f64) -> f64 {
    if mean_square > 0.0 {
        (10.0 * mean_square.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Lowest level reported anywhere in the crate, in dB.
pub const DB_FLOOR: f64 = -300.0;

/// Unit-RMS band-limited Gaussian reference of `n` samples.
///
/// White noise from `seed` is passed through [`band_limit`]; the filter's
/// start-up transient is generated and discarded so the output is
/// stationary from its first sample.
pub fn band_limited_reference(seed: u64, n: usize, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    let warm = BANDPASS_ORDER + 1;
    let raw = white_noise(seed, n + warm);
    let filtered = band_limit(&raw, f_lo, f_hi)?.into_samples();
    let mut out = filtered[warm..].to_vec();
    let gain = rms(&out);
    if gain > 0.0 {
        for v in &mut out {
            *v /= gain;
        }
    }
    Ok(out)
}
