use crate::error::{Error, Result};

/// Causal FIR coefficient vector, `coeffs[k]` multiplies the sample `k`
/// steps in the past.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    coeffs: Vec<f64>,
}

impl FirFilter {
    pub fn new(coeffs: Vec<f64>) -> Self {
        FirFilter { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        FirFilter { coeffs: vec![0.0; len] }
    }

    /// Unit impulse of the given length.
    pub fn delta(len: usize) -> Self {
        let mut coeffs = vec![0.0; len];
        if let Some(c) = coeffs.first_mut() {
            *c = 1.0;
        }
        FirFilter { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance to another filter of the same length.
    pub fn distance(&self, other: &FirFilter) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn fill_zero(&mut self) {
        self.coeffs.fill(0.0);
    }

    /// `self += scale * x`, element-wise.
    #[inline]
    pub fn axpy(&mut self, scale: f64, x: &[f64]) {
        debug_assert_eq!(self.coeffs.len(), x.len());
        for (c, v) in self.coeffs.iter_mut().zip(x) {
            *c += scale * v;
        }
    }

    /// Inner product with a most-recent-first window; no length check.
    #[inline]
    pub fn output(&self, window: &[f64]) -> f64 {
        dot(&self.coeffs, window)
    }
}

impl From<Vec<f64>> for FirFilter {
    fn from(coeffs: Vec<f64>) -> Self {
        FirFilter { coeffs }
    }
}

/// Checked filter output `hᵀ·window`.
pub fn fir_apply(h: &FirFilter, window: &[f64]) -> Result<f64> {
    if h.len() != window.len() {
        return Err(Error::contract(format!(
            "filter has {} taps but window has {} samples",
            h.len(),
            window.len()
        )));
    }
    Ok(dot(h.coeffs(), window))
}

/// Dot product over the common prefix of `a` and `b`.
///
/// Four independent partial sums keep the loop vectorizable; the result
/// differs from a left-to-right sum only by rounding.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..n {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Causal convolution truncated to the input length:
/// `y[n] = Σ_k h[k]·x[n−k]`, with `x` taken as zero before index 0.
pub fn convolve_causal(h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        let kmax = h.len().min(n + 1);
        let mut acc = 0.0;
        for k in 0..kmax {
            acc += h[k] * x[n - k];
        }
        *out = acc;
    }
    y
}
