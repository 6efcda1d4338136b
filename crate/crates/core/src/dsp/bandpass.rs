use super::{convolve_causal, SignalBuffer};
use crate::error::{Error, Result};

/// Band-pass FIR order (taps − 1).
pub const BANDPASS_ORDER: usize = 255;

/// Hamming-windowed sinc band-pass, linear phase, `BANDPASS_ORDER + 1` taps.
///
/// Built as the difference of two windowed low-pass prototypes and
/// normalized to unit gain at the band's geometric centre.
pub fn bandpass_taps(f_lo: f64, f_hi: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < sample_rate / 2.0) {
        return Err(Error::contract(format!(
            "band [{f_lo}, {f_hi}] Hz invalid for sample rate {sample_rate} Hz"
        )));
    }
    let n = BANDPASS_ORDER + 1;
    let centre = BANDPASS_ORDER as f64 / 2.0;
    let lowpass = |fc: f64, t: f64| {
        let wc = 2.0 * fc / sample_rate;
        if t == 0.0 {
            wc
        } else {
            (std::f64::consts::PI * wc * t).sin() / (std::f64::consts::PI * t)
        }
    };
    let mut taps: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 - centre;
            let window = 0.54 - 0.46 * (std::f64::consts::TAU * k as f64 / BANDPASS_ORDER as f64).cos();
            (lowpass(f_hi, t) - lowpass(f_lo, t)) * window
        })
        .collect();

    let f0 = (f_lo * f_hi).sqrt();
    let (mut re, mut im) = (0.0, 0.0);
    for (k, h) in taps.iter().enumerate() {
        let phase = std::f64::consts::TAU * f0 * k as f64 / sample_rate;
        re += h * phase.cos();
        im -= h * phase.sin();
    }
    let gain = (re * re + im * im).sqrt();
    for h in &mut taps {
        *h /= gain;
    }
    Ok(taps)
}

/// Causally filters `x` through the band-pass; output has the input's length.
pub fn band_limit(x: &SignalBuffer, f_lo: f64, f_hi: f64) -> Result<SignalBuffer> {
    let taps = bandpass_taps(f_lo, f_hi, x.sample_rate())?;
    SignalBuffer::new(convolve_causal(&taps, x.samples()), x.sample_rate())
}
