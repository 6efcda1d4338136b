//! Meta-learned co-initialization of the control filter and the
//! secondary-path model.
//!
//! Each epoch draws one task (a primary/secondary pair with its signal
//! tracks), adapts a copy of the current pair `(Φ, Ψ)` with a short
//! two-phase inner loop, evaluates the adapted filters on a disjoint
//! validation segment and moves `(Φ, Ψ)` along the exponentially weighted
//! first-order meta-gradient:
//!
//! ```text
//! phase A  ŝ ← ŝ + μ_s·e_s·u,   e_s = sᵀu − ŝᵀu          (T_A steps)
//! phase B  w ← w + μ_w·e·x',    e   = d − wᵀx', x̃ = ŝᵀx_s  (T_B steps)
//! ΔΨ = Σ_t λ_s^t·e_s†(n−t)·u†(n−t)        over the last N_s validation samples
//! ΔΦ = Σ_t λ_w^t·e†(n−t)·x'†(n−t)         over the last N_w validation samples
//! Φ ← Φ + α_w·ΔΦ,  Ψ ← Ψ + α_s·ΔΨ
//! ```
//!
//! The accumulated Δ terms are negative squared-error gradients, so adding
//! them descends the validation loss.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{band_limited_reference, convolve_causal, derive_seed, dot, DelayLine, FirFilter, NormalStream, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::paths::PathPair;

/// Source of the phase-A identification excitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Excitation {
    /// Fresh unit-variance white noise.
    Aux,
    /// Samples of the task's reference track.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetaConfig {
    pub l_w: usize,
    pub l_s: usize,
    pub t_a: usize,
    pub t_b: usize,
    pub n_s: usize,
    pub n_w: usize,
    pub lambda_s: f64,
    pub lambda_w: f64,
    pub mu_s: f64,
    pub mu_w: f64,
    pub alpha_s: f64,
    pub alpha_w: f64,
    pub epochs: usize,
    /// Samples per training draw (phase A and phase B sub-segments).
    pub segment_len: usize,
    /// Length of each task's reference/disturbance track.
    pub track_len: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub seed: u64,
    pub phase_a_excitation: Excitation,
    pub divergence_limit: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            l_w: 192,
            l_s: 128,
            t_a: 500,
            t_b: 300,
            n_s: 256,
            n_w: 256,
            lambda_s: 0.999,
            lambda_w: 0.999,
            mu_s: 1e-3,
            mu_w: 1e-3,
            alpha_s: 5e-5,
            alpha_w: 5e-5,
            epochs: 4000,
            segment_len: 2_000,
            track_len: 80_000,
            band_lo: 200.0,
            band_hi: 2000.0,
            seed: 1,
            phase_a_excitation: Excitation::Aux,
            divergence_limit: 1e6,
        }
    }
}

impl MetaConfig {
    fn phase_a_len(&self) -> usize {
        self.t_a + self.l_s - 1
    }

    fn phase_b_len(&self) -> usize {
        self.t_b + self.l_w + self.l_s - 2
    }

    /// Validation samples needed for both gradient windows.
    pub fn validation_len(&self) -> usize {
        (self.n_w + self.l_w + self.l_s - 2).max(self.n_s + self.l_s - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("l_w", self.l_w),
            ("l_s", self.l_s),
            ("t_a", self.t_a),
            ("t_b", self.t_b),
            ("n_s", self.n_s),
            ("n_w", self.n_w),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        for (name, v) in [("lambda_s", self.lambda_s), ("lambda_w", self.lambda_w)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} not in (0, 1]"));
            }
        }
        for (name, v) in [
            ("mu_s", self.mu_s),
            ("mu_w", self.mu_w),
            ("alpha_s", self.alpha_s),
            ("alpha_w", self.alpha_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be > 0"));
            }
        }
        if self.segment_len < self.phase_a_len() + self.phase_b_len() {
            return bad(format!(
                "segment_len {} shorter than phase A + phase B needs ({})",
                self.segment_len,
                self.phase_a_len() + self.phase_b_len()
            ));
        }
        if self.track_len < self.segment_len + self.validation_len() {
            return bad(format!(
                "track_len {} cannot hold a segment plus validation ({})",
                self.track_len,
                self.segment_len + self.validation_len()
            ));
        }
        if !(self.band_lo > 0.0 && self.band_lo < self.band_hi && self.band_hi < SAMPLE_RATE / 2.0) {
            return bad(format!("band [{}, {}] Hz invalid", self.band_lo, self.band_hi));
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be > 0".into());
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the TOML rendering.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let hash = Sha256::digest(text.as_bytes());
        hex::encode(&hash[..8])
    }
}

/// Provenance carried alongside a learned initialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitMetadata {
    pub epochs: usize,
    pub digest: String,
}

/// Learned starting point `(Φ, Ψ)` for the control filter and the
/// secondary-path model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaInit {
    pub phi: FirFilter,
    pub psi: FirFilter,
    pub metadata: InitMetadata,
}

impl MetaInit {
    pub fn new(phi: FirFilter, psi: FirFilter) -> Self {
        MetaInit {
            phi,
            psi,
            metadata: InitMetadata::default(),
        }
    }

    pub fn zeros(l_w: usize, l_s: usize) -> Self {
        Self::new(FirFilter::zeros(l_w), FirFilter::zeros(l_s))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "metanc-meta-init v1");
        let _ = writeln!(out, "l_w {}", self.phi.len());
        let _ = writeln!(out, "l_s {}", self.psi.len());
        let _ = writeln!(out, "sample_rate {}", SAMPLE_RATE);
        let _ = writeln!(out, "epochs {}", self.metadata.epochs);
        let digest = if self.metadata.digest.is_empty() { "-" } else { &self.metadata.digest };
        let _ = writeln!(out, "digest {digest}");
        for c in self.phi.coeffs().iter().chain(self.psi.coeffs()) {
            let _ = writeln!(out, "{c:.16e}");
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed {
            path: origin.to_path_buf(),
            reason,
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("metanc-meta-init v1") {
            return Err(malformed("missing meta-init header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| malformed(format!("missing `{key}`")))?;
            match line.trim().split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(malformed(format!("expected `{key} <value>`, found {line:?}"))),
            }
        };
        let parse_usize = |key: &str, v: String| {
            v.parse::<usize>()
                .map_err(|_| malformed(format!("`{key}` is not an integer: {v}")))
        };
        let l_w = parse_usize("l_w", field("l_w")?)?;
        let l_s = parse_usize("l_s", field("l_s")?)?;
        let rate: f64 = field("sample_rate")?
            .parse()
            .map_err(|_| malformed("bad sample_rate".into()))?;
        if rate != SAMPLE_RATE {
            return Err(malformed(format!("sample rate {rate} Hz, expected {SAMPLE_RATE}")));
        }
        let epochs = parse_usize("epochs", field("epochs")?)?;
        let digest = field("digest")?;
        let digest = if digest == "-" { String::new() } else { digest };

        let mut coeffs = Vec::with_capacity(l_w + l_s);
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| malformed(format!("cannot parse coefficient {line:?}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: origin.to_path_buf(),
                    index: coeffs.len(),
                });
            }
            coeffs.push(v);
        }
        if coeffs.len() != l_w + l_s {
            return Err(malformed(format!(
                "expected {} coefficients, found {}",
                l_w + l_s,
                coeffs.len()
            )));
        }
        let psi = coeffs.split_off(l_w);
        Ok(MetaInit {
            phi: FirFilter::new(coeffs),
            psi: FirFilter::new(psi),
            metadata: InitMetadata { epochs, digest },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// A path pair with its reference track and the disturbance it produces.
#[derive(Debug, Clone)]
pub struct Task {
    pub pair: PathPair,
    /// True secondary path fitted to `l_s` taps.
    pub secondary: FirFilter,
    pub x: Vec<f64>,
    pub d: Vec<f64>,
}

impl Task {
    pub fn synthesize(pair: &PathPair, cfg: &MetaConfig, seed: u64) -> Result<Self> {
        let x = band_limited_reference(seed, cfg.track_len, cfg.band_lo, cfg.band_hi)?;
        let d = convolve_causal(pair.primary.taps(), &x);
        Ok(Task {
            secondary: pair.secondary.resized(cfg.l_s).ir,
            pair: pair.clone(),
            x,
            d,
        })
    }

    /// Samples a training segment and the validation segment right after it.
    pub fn draw(&self, rng: &mut NormalStream, aux: &mut NormalStream, cfg: &MetaConfig) -> TaskDraw<'_> {
        let span = cfg.segment_len + cfg.validation_len();
        let max_start = self.x.len() - span;
        let start = rng.next_index(max_start + 1);
        let train = start..start + cfg.segment_len;
        let val = train.end..train.end + cfg.validation_len();
        TaskDraw {
            secondary: &self.secondary,
            train_x: &self.x[train.clone()],
            train_d: &self.d[train],
            val_x: &self.x[val.clone()],
            val_d: &self.d[val],
            train_aux: aux.take(cfg.phase_a_len()),
            val_aux: aux.take(cfg.validation_len()),
        }
    }
}

/// One epoch's data: disjoint training and validation windows of a task.
#[derive(Debug, Clone)]
pub struct TaskDraw<'a> {
    pub secondary: &'a FirFilter,
    pub train_x: &'a [f64],
    pub train_d: &'a [f64],
    pub val_x: &'a [f64],
    pub val_d: &'a [f64],
    pub train_aux: Vec<f64>,
    pub val_aux: Vec<f64>,
}

impl TaskDraw<'_> {
    fn phase_a_excitation(&self, cfg: &MetaConfig) -> &[f64] {
        match cfg.phase_a_excitation {
            Excitation::Aux => &self.train_aux,
            Excitation::Reference => &self.train_x[..cfg.phase_a_len()],
        }
    }

    fn phase_b_segment(&self, cfg: &MetaConfig) -> (&[f64], &[f64]) {
        let off = cfg.phase_a_len();
        (&self.train_x[off..], &self.train_d[off..])
    }

    fn validation_excitation(&self, cfg: &MetaConfig) -> &[f64] {
        match cfg.phase_a_excitation {
            Excitation::Aux => &self.val_aux,
            Excitation::Reference => self.val_x,
        }
    }
}

/// Phase A: `T_A` LMS steps identifying `s_true` from `excitation`.
///
/// Step `t` uses the window ending at sample `L_s − 1 + t`, so the first
/// regressor is fully populated.
pub fn phase_a(psi_start: &FirFilter, s_true: &FirFilter, excitation: &[f64], cfg: &MetaConfig) -> Result<FirFilter> {
    let l_s = cfg.l_s;
    if psi_start.len() != l_s || s_true.len() != l_s {
        return Err(Error::contract("phase A filters must have l_s taps"));
    }
    if excitation.len() < cfg.t_a + l_s - 1 {
        return Err(Error::contract(format!(
            "phase A needs {} excitation samples, got {}",
            cfg.t_a + l_s - 1,
            excitation.len()
        )));
    }
    let mut s_hat = psi_start.clone();
    let mut u = DelayLine::new(l_s);
    for &v in &excitation[..l_s - 1] {
        u.push(v);
    }
    for t in 0..cfg.t_a {
        u.push(excitation[l_s - 1 + t]);
        let win = u.full();
        let e_s = dot(s_true.coeffs(), win) - dot(s_hat.coeffs(), win);
        if !e_s.is_finite() || e_s.abs() > cfg.divergence_limit {
            return Err(Error::Diverged { sample: t as u64 });
        }
        s_hat.axpy(cfg.mu_s * e_s, win);
    }
    Ok(s_hat)
}

/// Phase B: `T_B` FxLMS steps on `e = d − wᵀx'` with `x̃ = ŝ * x`.
pub fn phase_b(phi_start: &FirFilter, s_hat: &FirFilter, x: &[f64], d: &[f64], cfg: &MetaConfig) -> Result<FirFilter> {
    let (l_w, l_s) = (cfg.l_w, cfg.l_s);
    if phi_start.len() != l_w || s_hat.len() != l_s {
        return Err(Error::contract("phase B filter lengths do not match config"));
    }
    let first = l_s + l_w - 2;
    if x.len() < first + cfg.t_b || d.len() < first + cfg.t_b {
        return Err(Error::contract(format!(
            "phase B needs {} samples of x and d",
            first + cfg.t_b
        )));
    }
    let mut w = phi_start.clone();
    let mut x_line = DelayLine::new(l_s);
    let mut xf_line = DelayLine::new(l_w);
    for m in 0..first + cfg.t_b {
        x_line.push(x[m]);
        if m + 1 >= l_s {
            xf_line.push(dot(s_hat.coeffs(), x_line.full()));
        }
        if m >= first {
            let xp = xf_line.full();
            let e = d[m] - dot(w.coeffs(), xp);
            if !e.is_finite() || e.abs() > cfg.divergence_limit {
                return Err(Error::Diverged { sample: (m - first) as u64 });
            }
            w.axpy(cfg.mu_w * e, xp);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaGradients {
    pub delta_phi: Vec<f64>,
    pub delta_psi: Vec<f64>,
    /// Mean e†² over the `N_w` control-validation samples.
    pub val_mse: f64,
    /// Mean e_s†² over the `N_s` identification-validation samples.
    pub val_mse_sp: f64,
}

/// Exponentially weighted validation gradients with `w` and `ŝ` frozen.
///
/// Both windows end at the last validation sample.
pub fn meta_gradients(w: &FirFilter, s_hat: &FirFilter, draw: &TaskDraw<'_>, cfg: &MetaConfig) -> Result<MetaGradients> {
    let (l_w, l_s) = (cfg.l_w, cfg.l_s);
    let s_true = draw.secondary;
    if w.len() != l_w || s_hat.len() != l_s || s_true.len() != l_s {
        return Err(Error::contract("validation filter lengths do not match config"));
    }
    let exc = draw.validation_excitation(cfg);
    if exc.len() < cfg.n_s + l_s - 1 {
        return Err(Error::contract("validation excitation too short for N_s"));
    }
    let (x, d) = (draw.val_x, draw.val_d);
    if x.len() < cfg.n_w + l_w + l_s - 2 || d.len() != x.len() {
        return Err(Error::contract("validation reference too short for N_w"));
    }

    // Secondary-path term: residual of the frozen model on each window.
    let misfit: Vec<f64> = s_true
        .coeffs()
        .iter()
        .zip(s_hat.coeffs())
        .map(|(s, sh)| s - sh)
        .collect();
    let mut delta_psi = vec![0.0; l_s];
    let mut sq_sp = 0.0;
    let mut u = DelayLine::new(l_s);
    let start = exc.len() - (cfg.n_s + l_s - 1);
    for &v in &exc[start..start + l_s - 1] {
        u.push(v);
    }
    // Walk forward in time; sample k = n − t gets weight λ^t.
    for i in 0..cfg.n_s {
        u.push(exc[start + l_s - 1 + i]);
        let win = u.full();
        let e_s = dot(&misfit, win);
        let weight = cfg.lambda_s.powi((cfg.n_s - 1 - i) as i32);
        for (g, &uj) in delta_psi.iter_mut().zip(win) {
            *g += weight * e_s * uj;
        }
        sq_sp += e_s * e_s;
    }

    // Control term on the filtered reference.
    let mut delta_phi = vec![0.0; l_w];
    let mut sq = 0.0;
    let span = cfg.n_w + l_w + l_s - 2;
    let base = x.len() - span;
    let mut x_line = DelayLine::new(l_s);
    let mut xf_line = DelayLine::new(l_w);
    let first = l_s + l_w - 2;
    for m in 0..span {
        x_line.push(x[base + m]);
        if m + 1 >= l_s {
            xf_line.push(dot(s_hat.coeffs(), x_line.full()));
        }
        if m >= first {
            let xp = xf_line.full();
            let e = d[base + m] - dot(w.coeffs(), xp);
            let weight = cfg.lambda_w.powi((span - 1 - m) as i32);
            for (g, &xj) in delta_phi.iter_mut().zip(xp) {
                *g += weight * e * xj;
            }
            sq += e * e;
        }
    }

    Ok(MetaGradients {
        delta_phi,
        delta_psi,
        val_mse: sq / cfg.n_w as f64,
        val_mse_sp: sq_sp / cfg.n_s as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based epoch number.
    pub epoch: usize,
    pub task: usize,
    pub val_mse: f64,
    pub val_mse_sp: f64,
}

#[derive(Debug, Clone)]
pub struct MetaTraining {
    pub init: MetaInit,
    pub log: Vec<EpochLog>,
}

/// Runs `cfg.epochs` meta-updates starting from zeros.
pub fn meta_train(pairs: &[PathPair], cfg: &MetaConfig) -> Result<MetaTraining> {
    meta_train_from(pairs, cfg, MetaInit::zeros(cfg.l_w, cfg.l_s))
}

pub fn meta_train_from(pairs: &[PathPair], cfg: &MetaConfig, start: MetaInit) -> Result<MetaTraining> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::contract("meta-training needs at least one task"));
    }
    if start.phi.len() != cfg.l_w || start.psi.len() != cfg.l_s {
        return Err(Error::contract("starting init does not match configured lengths"));
    }
    let tasks = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| Task::synthesize(p, cfg, derive_seed(cfg.seed, 0x100 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut pick = NormalStream::new(derive_seed(cfg.seed, 1));
    let mut aux = NormalStream::new(derive_seed(cfg.seed, 2));

    let mut phi = start.phi;
    let mut psi = start.psi;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let idx = pick.next_index(tasks.len());
        let draw = tasks[idx].draw(&mut pick, &mut aux, cfg);
        let inner = |e: Error| match e {
            Error::Diverged { sample } => Error::InnerDiverged { epoch, sample },
            other => other,
        };
        let s_hat = phase_a(&psi, draw.secondary, draw.phase_a_excitation(cfg), cfg).map_err(inner)?;
        let (bx, bd) = draw.phase_b_segment(cfg);
        let w = phase_b(&phi, &s_hat, bx, bd, cfg).map_err(inner)?;
        let g = meta_gradients(&w, &s_hat, &draw, cfg)?;
        phi.axpy(cfg.alpha_w, &g.delta_phi);
        psi.axpy(cfg.alpha_s, &g.delta_psi);
        if !(phi.is_finite() && psi.is_finite()) {
            return Err(Error::InnerDiverged { epoch, sample: 0 });
        }
        log.push(EpochLog {
            epoch: epoch + 1,
            task: idx,
            val_mse: g.val_mse,
            val_mse_sp: g.val_mse_sp,
        });
    }
    Ok(MetaTraining {
        init: MetaInit {
            phi,
            psi,
            metadata: InitMetadata {
                epochs: cfg.epochs,
                digest: cfg.digest(),
            },
        },
        log,
    })
}
