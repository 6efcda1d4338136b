//! Shared fixtures for the integration tests: brute-force reference
//! implementations written straight from the defining sums, and the
//! surrogate path populations used by the end-to-end checks.
#![allow(dead_code)]

use std::f64::consts::PI;

use metanc::paths::{PathPair, SurrogateFamily};

/// Plain left-to-right sum of products.
pub fn naive_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn naive_ema(p: f64, alpha: f64, z: f64) -> f64 {
    alpha * p + (1.0 - alpha) * z * z
}

pub fn naive_aux(p_x: f64, p_e: f64, v: f64, c_aux: f64, eps: f64) -> f64 {
    let m = if p_x < p_e { p_x } else { p_e };
    c_aux * v * (m + eps).sqrt()
}

/// `Σ_k h[k]·x[n−k]` with zeros before the start.
pub fn naive_conv_at(h: &[f64], x: &[f64], n: isize) -> f64 {
    let mut acc = 0.0;
    for (k, &hk) in h.iter().enumerate() {
        let i = n - k as isize;
        if i >= 0 && (i as usize) < x.len() {
            acc += hk * x[i as usize];
        }
    }
    acc
}

/// Regressor `[z(n), z(n−1), …, z(n−len+1)]` from a stored sequence.
pub fn naive_stack(z: &[f64], n: isize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let i = n - k as isize;
            if i >= 0 { z[i as usize] } else { 0.0 }
        })
        .collect()
}

/// Magnitude in dB via the real and imaginary DTFT sums.
pub fn naive_mag_db(h: &[f64], f: f64, fs: f64) -> f64 {
    let omega = 2.0 * PI * f / fs;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &c) in h.iter().enumerate() {
        re += c * (omega * k as f64).cos();
        im -= c * (omega * k as f64).sin();
    }
    20.0 * (re * re + im * im).sqrt().log10()
}

pub fn naive_lsd(a: &[f64], b: &[f64], freqs: &[f64], fs: f64) -> f64 {
    let mut acc = 0.0;
    for &f in freqs {
        let d = naive_mag_db(a, f, fs) - naive_mag_db(b, f, fs);
        acc += d * d;
    }
    (acc / freqs.len() as f64).sqrt()
}

pub fn naive_dispersion(set: &[Vec<f64>], freqs: &[f64], fs: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..set.len() {
        for j in (i + 1)..set.len() {
            sum += naive_lsd(&set[i], &set[j], freqs, fs);
            count += 1;
        }
    }
    sum / count as f64
}

/// Windows start at multiples of `hop` and must fit entirely.
pub fn naive_sliding_mse_db(e: &[f64], window: usize, hop: usize, fs: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= e.len() {
        let mut ms = 0.0;
        for v in &e[start..start + window] {
            ms += v * v;
        }
        ms /= window as f64;
        let level = if ms > 0.0 { (10.0 * ms.log10()).max(-300.0) } else { -300.0 };
        out.push(((start as f64 + window as f64 / 2.0) / fs, level));
        start += hop;
    }
    out
}

/// Validation gradients straight from their defining sums. `exc`, `x`
/// and `d` are full validation streams; both windows end at their last
/// sample.
#[allow(clippy::too_many_arguments)]
pub fn naive_meta_gradients(
    w: &[f64],
    s_hat: &[f64],
    s_true: &[f64],
    exc: &[f64],
    x: &[f64],
    d: &[f64],
    n_s: usize,
    n_w: usize,
    lambda_s: f64,
    lambda_w: f64,
) -> (Vec<f64>, Vec<f64>) {
    let l_s = s_hat.len();
    let l_w = w.len();
    let n_exc = exc.len() as isize - 1;
    let mut dpsi = vec![0.0; l_s];
    for t in 0..n_s {
        let k = n_exc - t as isize;
        let u = naive_stack(exc, k, l_s);
        let e_s = naive_dot(s_true, &u) - naive_dot(s_hat, &u);
        let weight = lambda_s.powi(t as i32);
        for j in 0..l_s {
            dpsi[j] += weight * e_s * u[j];
        }
    }
    let xf: Vec<f64> = (0..x.len()).map(|i| naive_conv_at(s_hat, x, i as isize)).collect();
    let n_x = x.len() as isize - 1;
    let mut dphi = vec![0.0; l_w];
    for t in 0..n_w {
        let k = n_x - t as isize;
        let xp = naive_stack(&xf, k, l_w);
        let e = d[k as usize] - naive_dot(w, &xp);
        let weight = lambda_w.powi(t as i32);
        for j in 0..l_w {
            dphi[j] += weight * e * xp[j];
        }
    }
    (dphi, dpsi)
}

/// Largest relative error, measured against `max(|reference|, 1)`.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    (v[n / 2] + v[(n - 1) / 2]) / 2.0
}

/// Stock pairs `first, first+1, …`.
pub fn stock_pairs(first: u64, count: u64) -> Vec<PathPair> {
    (first..first + count)
        .map(|s| SurrogateFamily::stock_pair(s).expect("stock pair"))
        .collect()
}

/// Training set of `n` pairs. A diverse side uses independent members of
/// the family; a compact side clusters every member tightly around one
/// anchor member.
pub fn crafted_set(tag: u64, n: u64, diverse_primary: bool, diverse_secondary: bool) -> Vec<PathPair> {
    const JITTER: f64 = 0.05;
    let spread = SurrogateFamily::SPREAD;
    let side = |family: &SurrogateFamily, diverse: bool, anchor: u64, seed: u64| {
        if diverse {
            family.member(seed, spread)
        } else {
            family.blend(&[(anchor, spread), (seed, JITTER)])
        }
        .expect("surrogate member")
    };
    (0..n)
        .map(|i| {
            let seed = 50_000 + 100 * tag + i;
            let p = side(&SurrogateFamily::PRIMARY, diverse_primary, 40_000 + tag, seed);
            let s = side(&SurrogateFamily::SECONDARY, diverse_secondary, 45_000 + tag, seed + 50);
            PathPair::new(p, s).expect("pair")
        })
        .collect()
}
