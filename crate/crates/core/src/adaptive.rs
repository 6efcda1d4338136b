//! Cross-updated online secondary-path modeling FxLMS.
//!
//! Three adaptive filters run in one pass per sample: the control filter
//! `w`, the secondary-path estimate `ŝ` and the auxiliary canceller `h`.
//! Low-level white noise `v_m`, scaled by the smaller of the reference and
//! cleaned-error powers, is added to the loudspeaker signal so `ŝ` can be
//! identified while control is running.
//!
//! Plant convention: the loudspeaker radiates the control signal in
//! anti-phase, so the microphone sees
//!
//! ```text
//! e(n)  = d(n) − sᵀu_w(n) + sᵀu(n)
//! e'(n) = e(n) − ŝᵀu(n)
//! ```
//!
//! which makes `w ← w + μ_w·x̃·e'` a descent step and matches the meta
//! trainer's residual `d − wᵀx'`.
//!
//! An error-jump detector watches `‖h‖₂`; a rise of more than `gamma`
//! over `M` samples resets `h` to zero and `(ŝ, w)` to the configured
//! co-initialization.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dsp::{dot, DelayLine, EmaPower, FirFilter};
use crate::error::{Error, Result};
use crate::meta::MetaInit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OspmConfig {
    /// Control-filter taps.
    pub l_w: usize,
    /// Secondary-path model and auxiliary-canceller taps.
    pub l_s: usize,
    pub mu_w: f64,
    pub mu_s: f64,
    pub mu_h: f64,
    /// EMA forgetting factor for the scheduling powers.
    pub alpha: f64,
    pub c_aux: f64,
    pub eps: f64,
    /// Bulk delay (taps) of the reference feeding `h`.
    pub delay_h: usize,
    pub detector_m: usize,
    pub detector_gamma: f64,
    pub detector_holdoff: usize,
    /// `|e|` above this aborts the run.
    pub divergence_limit: f64,
}

impl Default for OspmConfig {
    fn default() -> Self {
        OspmConfig {
            l_w: 192,
            l_s: 128,
            mu_w: 3e-4,
            mu_s: 1e-3,
            mu_h: 1e-3,
            alpha: 0.999,
            c_aux: 0.3,
            eps: 1e-8,
            delay_h: 64,
            detector_m: 800,
            detector_gamma: 0.02,
            detector_holdoff: 16000,
            divergence_limit: 1e6,
        }
    }
}

impl OspmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.l_w == 0 || self.l_s == 0 || self.detector_m == 0 {
            return bad("filter lengths and detector look-back must be >= 1".into());
        }
        for (name, mu) in [("mu_w", self.mu_w), ("mu_s", self.mu_s), ("mu_h", self.mu_h)] {
            if !(mu >= 0.0 && mu.is_finite()) {
                return bad(format!("{name} = {mu} must be finite and >= 0"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} not in (0, 1)", self.alpha));
        }
        if !(self.c_aux >= 0.0 && self.c_aux.is_finite()) {
            return bad(format!("c_aux = {} must be >= 0", self.c_aux));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps = {} must be > 0", self.eps));
        }
        if !(self.detector_gamma >= 0.0) {
            return bad(format!("detector_gamma = {} must be >= 0", self.detector_gamma));
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// Microphone residual.
    pub e: f64,
    /// Residual with the modeled auxiliary component removed.
    pub e_prime: f64,
    /// Injected auxiliary amplitude.
    pub v_m: f64,
    /// Control output before the secondary path.
    pub u: f64,
    pub jump_fired: bool,
}

/// `c_aux · v · √(min(P_x, P_e') + ε)`.
#[inline]
pub fn aux_scale(p_x: f64, p_e: f64, v: f64, cfg: &OspmConfig) -> f64 {
    cfg.c_aux * v * (p_x.min(p_e) + cfg.eps).sqrt()
}

/// True iff the newest entry exceeds the one `m` samples earlier by more
/// than `gamma`. Fewer than `m + 1` entries never fire.
pub fn detect_jump(history: &[f64], m: usize, gamma: f64) -> bool {
    let n = history.len();
    if m == 0 || n < m + 1 {
        return false;
    }
    history[n - 1] - history[n - 1 - m] > gamma
}

#[derive(Debug, Clone)]
pub struct OspmState {
    cfg: OspmConfig,
    w: FirFilter,
    s_hat: FirFilter,
    h: FirFilter,
    x_line: DelayLine,
    xf_line: DelayLine,
    u_line: DelayLine,
    uw_line: DelayLine,
    p_x: EmaPower,
    p_e: EmaPower,
    h_norms: VecDeque<f64>,
    holdoff: usize,
    reset_target: Option<MetaInit>,
    aux_energy: f64,
    samples: u64,
    resets: usize,
}

impl OspmState {
    /// All filters at zero, empty delay lines, no reset target.
    pub fn new(cfg: OspmConfig) -> Result<Self> {
        cfg.validate()?;
        let x_cap = cfg.l_w.max(cfg.l_s).max(cfg.delay_h + cfg.l_s);
        Ok(OspmState {
            w: FirFilter::zeros(cfg.l_w),
            s_hat: FirFilter::zeros(cfg.l_s),
            h: FirFilter::zeros(cfg.l_s),
            x_line: DelayLine::new(x_cap),
            xf_line: DelayLine::new(cfg.l_w),
            u_line: DelayLine::new(cfg.l_s),
            uw_line: DelayLine::new(cfg.l_s),
            p_x: EmaPower::new(cfg.alpha, 0.0)?,
            p_e: EmaPower::new(cfg.alpha, 0.0)?,
            h_norms: VecDeque::with_capacity(cfg.detector_m + 1),
            holdoff: 0,
            reset_target: None,
            aux_energy: 0.0,
            samples: 0,
            resets: 0,
            cfg,
        })
    }

    /// Starts from `(w, ŝ) = (Φ, Ψ)`; with `detector` set, jumps reset to
    /// the same pair. Start-up counts as a reset, so the hold-off runs first
    /// and the initial growth of `h` cannot fire the detector.
    pub fn with_init(cfg: OspmConfig, init: &MetaInit, detector: bool) -> Result<Self> {
        let mut st = Self::new(cfg)?;
        st.check_dims(init)?;
        st.w = init.phi.clone();
        st.s_hat = init.psi.clone();
        if detector {
            st.reset_target = Some(init.clone());
            st.holdoff = cfg.detector_holdoff;
        }
        Ok(st)
    }

    fn check_dims(&self, init: &MetaInit) -> Result<()> {
        if init.phi.len() != self.cfg.l_w || init.psi.len() != self.cfg.l_s {
            return Err(Error::contract(format!(
                "init has ({}, {}) taps, controller expects ({}, {})",
                init.phi.len(),
                init.psi.len(),
                self.cfg.l_w,
                self.cfg.l_s
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &OspmConfig {
        &self.cfg
    }

    pub fn w(&self) -> &FirFilter {
        &self.w
    }

    pub fn s_hat(&self) -> &FirFilter {
        &self.s_hat
    }

    pub fn h(&self) -> &FirFilter {
        &self.h
    }

    pub fn p_x(&self) -> f64 {
        self.p_x.value()
    }

    pub fn p_e(&self) -> f64 {
        self.p_e.value()
    }

    /// Σ v_m² over every sample processed so far.
    pub fn aux_energy(&self) -> f64 {
        self.aux_energy
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn h_norm_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.h_norms.iter().copied()
    }

    pub fn set_w(&mut self, w: FirFilter) -> Result<()> {
        if w.len() != self.cfg.l_w {
            return Err(Error::contract("control filter length mismatch"));
        }
        self.w = w;
        Ok(())
    }

    pub fn set_s_hat(&mut self, s_hat: FirFilter) -> Result<()> {
        if s_hat.len() != self.cfg.l_s {
            return Err(Error::contract("secondary-path model length mismatch"));
        }
        self.s_hat = s_hat;
        Ok(())
    }

    pub fn set_h(&mut self, h: FirFilter) -> Result<()> {
        if h.len() != self.cfg.l_s {
            return Err(Error::contract("auxiliary canceller length mismatch"));
        }
        self.h = h;
        Ok(())
    }

    /// Zeroes all three adaptive filters; signal history is kept.
    pub fn zero_filters(&mut self) {
        self.w.fill_zero();
        self.s_hat.fill_zero();
        self.h.fill_zero();
    }

    /// `h ← 0`, `(ŝ, w) ← (Ψ, Φ)`; delay lines and scheduling powers are
    /// kept, detector history is cleared and the hold-off restarted.
    pub fn reset_to(&mut self, init: &MetaInit) -> Result<()> {
        self.check_dims(init)?;
        self.h.fill_zero();
        self.s_hat.coeffs_mut().copy_from_slice(init.psi.coeffs());
        self.w.coeffs_mut().copy_from_slice(init.phi.coeffs());
        self.h_norms.clear();
        self.holdoff = self.cfg.detector_holdoff;
        self.resets += 1;
        Ok(())
    }

    /// Advances one sample. `x` is the reference, `d` the disturbance at
    /// the microphone, `v` a unit-variance auxiliary draw and
    /// `true_secondary` the physical speaker-to-mic response (`l_s` taps).
    pub fn step(&mut self, x: f64, d: f64, v: f64, true_secondary: &FirFilter) -> Result<StepOutput> {
        let cfg = self.cfg;
        if true_secondary.len() != cfg.l_s {
            return Err(Error::contract(format!(
                "true secondary path has {} taps, expected {}",
                true_secondary.len(),
                cfg.l_s
            )));
        }
        let n = self.samples;
        self.samples += 1;

        // (a) reference power and control output
        self.p_x.update(x);
        self.x_line.push(x);
        let x_stack = self.x_line.full();
        let u = dot(self.w.coeffs(), &x_stack[..cfg.l_w]);
        self.uw_line.push(u);

        // (b) scheduled auxiliary injection
        let v_m = aux_scale(self.p_x.value(), self.p_e.value(), v, &cfg);
        self.u_line.push(v_m);
        self.aux_energy += v_m * v_m;
        let u_aux = self.u_line.full();

        // (c) plant and (d) cleaned error
        let s = true_secondary.coeffs();
        let e = d - dot(s, self.uw_line.full()) + dot(s, u_aux);
        let e_prime = e - dot(self.s_hat.coeffs(), u_aux);
        if !(e.is_finite() && e_prime.is_finite()) || e.abs() > cfg.divergence_limit {
            return Err(Error::Diverged { sample: n });
        }

        // (e)
        self.p_e.update(e_prime);

        // (f) shared innovation drives ŝ and h
        let x_h = self.x_line.window_from(cfg.delay_h, cfg.l_s);
        let r = e_prime - dot(self.h.coeffs(), x_h);
        self.s_hat.axpy(cfg.mu_s * r, u_aux);
        self.h.axpy(cfg.mu_h * r, x_h);

        // (g) filtered reference from the freshly updated ŝ
        let xf = dot(self.s_hat.coeffs(), &self.x_line.full()[..cfg.l_s]);
        self.xf_line.push(xf);
        self.w.axpy(cfg.mu_w * e_prime, self.xf_line.full());

        // (h) error-jump detector
        let jump_fired = self.run_detector()?;

        Ok(StepOutput {
            e,
            e_prime,
            v_m,
            u,
            jump_fired,
        })
    }

    fn run_detector(&mut self) -> Result<bool> {
        if self.holdoff > 0 {
            self.holdoff -= 1;
            return Ok(false);
        }
        let m = self.cfg.detector_m;
        if self.h_norms.len() == m + 1 {
            self.h_norms.pop_front();
        }
        self.h_norms.push_back(self.h.norm());
        let Some(target) = self.reset_target.take() else {
            return Ok(false);
        };
        // Only the endpoints of the (m + 1)-long history matter.
        let fired = self.h_norms.len() == m + 1 && {
            let ends = [self.h_norms[0], self.h_norms[m]];
            detect_jump(&ends, 1, self.cfg.detector_gamma)
        };
        if fired {
            self.reset_to(&target)?;
        }
        self.reset_target = Some(target);
        Ok(fired)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::NormalStream;
    use crate::paths::synth_path;
    use proptest::prelude::*;

    fn small_cfg() -> OspmConfig {
        OspmConfig {
            l_w: 16,
            l_s: 8,
            delay_h: 4,
            detector_m: 10,
            detector_holdoff: 20,
            ..OspmConfig::default()
        }
    }

    #[test]
    fn aux_floor_case() {
        let cfg = OspmConfig { c_aux: 1.0, eps: 1e-6, ..OspmConfig::default() };
        assert!((aux_scale(0.0, 0.0, 1.0, &cfg) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn aux_takes_smaller_power() {
        let cfg = OspmConfig { c_aux: 0.5, eps: 0.0, ..OspmConfig::default() };
        assert_eq!(aux_scale(4.0, 9.0, 1.0, &cfg), 1.0);
    }

    proptest! {
        #[test]
        fn aux_is_monotone_in_min_power(
            a in 0.0f64..10.0, b in 0.0f64..10.0, bump in 0.0f64..5.0, v in 0.0f64..3.0
        ) {
            let cfg = OspmConfig::default();
            let lo = aux_scale(a, b, v, &cfg);
            let hi = aux_scale(a + bump, b + bump, v, &cfg);
            prop_assert!(hi >= lo);
        }

        #[test]
        fn jump_detection_is_shift_invariant(
            hist in prop::collection::vec(0.0f64..2.0, 2..40),
            shift in 0.0f64..10.0,
            m in 1usize..10,
            gamma in 0.0f64..1.0,
        ) {
            let shifted: Vec<f64> = hist.iter().map(|h| h + shift).collect();
            // Compare on differences computed the same way; equal up to
            // rounding of the shift, so only check non-borderline cases.
            let n = hist.len();
            if n > m {
                let diff = hist[n - 1] - hist[n - 1 - m];
                prop_assume!((diff - gamma).abs() > 1e-9);
            }
            prop_assert_eq!(detect_jump(&hist, m, gamma), detect_jump(&shifted, m, gamma));
        }
    }

    #[test]
    fn detector_rules() {
        assert!(!detect_jump(&[0.3; 20], 5, 0.0));
        let mut h = vec![0.0; 10];
        h.push(1.0);
        assert!(detect_jump(&h, 1, 0.5));
        let dec: Vec<f64> = (0..20).rev().map(f64::from).collect();
        assert!(!detect_jump(&dec, 3, 0.0));
        assert!(!detect_jump(&[0.0, 5.0], 2, 0.1), "warm-up never fires");
    }

    #[test]
    fn zero_filters_first_step() {
        let cfg = OspmConfig { c_aux: 0.0, ..small_cfg() };
        let mut st = OspmState::new(cfg).unwrap();
        let s = FirFilter::delta(cfg.l_s);
        let out = st.step(0.7, 1.0, 0.0, &s).unwrap();
        assert_eq!(out.e, 1.0);
        assert_eq!(out.e_prime, 1.0);
        assert_eq!(out.u, 0.0);
    }

    #[test]
    fn exact_model_cancels_auxiliary() {
        let cfg = OspmConfig { mu_w: 0.0, mu_s: 0.0, mu_h: 0.0, c_aux: 1.0, ..small_cfg() };
        let s = synth_path(3, cfg.l_s, 0.7, 1).unwrap().ir;
        let mut st = OspmState::new(cfg).unwrap();
        st.set_s_hat(s.clone()).unwrap();
        let mut rng = NormalStream::new(1);
        for k in 0..500 {
            let d = (k as f64 * 0.01).sin();
            let out = st.step(0.0, d, rng.next_normal(), &s).unwrap();
            assert!((out.e_prime - d).abs() < 1e-12);
        }
    }

    #[test]
    fn true_path_is_not_mutated() {
        let cfg = small_cfg();
        let s = synth_path(3, cfg.l_s, 0.7, 1).unwrap().ir;
        let before = s.clone();
        let mut st = OspmState::new(cfg).unwrap();
        let mut rng = NormalStream::new(2);
        for _ in 0..200 {
            st.step(rng.next_normal(), rng.next_normal(), rng.next_normal(), &s).unwrap();
        }
        assert_eq!(s, before);
    }

    #[test]
    fn divergence_is_reported_with_index() {
        let cfg = OspmConfig { divergence_limit: 10.0, c_aux: 0.0, ..small_cfg() };
        let s = FirFilter::delta(cfg.l_s);
        let mut st = OspmState::new(cfg).unwrap();
        st.step(0.0, 1.0, 0.0, &s).unwrap();
        assert!(matches!(st.step(0.0, 100.0, 0.0, &s), Err(Error::Diverged { sample: 1 })));
    }

    #[test]
    fn wrong_secondary_length_is_rejected() {
        let mut st = OspmState::new(small_cfg()).unwrap();
        assert!(st.step(0.0, 0.0, 0.0, &FirFilter::zeros(3)).is_err());
    }

    #[test]
    fn reset_clears_h_and_holds_off() {
        let cfg = small_cfg();
        let s = synth_path(5, cfg.l_s, 0.7, 1).unwrap().ir;
        let zero = MetaInit::zeros(cfg.l_w, cfg.l_s);
        let mut st = OspmState::with_init(cfg, &zero, true).unwrap();
        st.set_h(FirFilter::new(vec![1.0; cfg.l_s])).unwrap();
        st.reset_to(&zero).unwrap();
        assert_eq!(st.h().norm(), 0.0);
        assert_eq!(st.h_norm_history().count(), 0);
        // A huge canceller during hold-off must not fire.
        st.set_h(FirFilter::new(vec![5.0; cfg.l_s])).unwrap();
        for _ in 0..cfg.detector_holdoff {
            assert!(!st.step(0.0, 0.0, 0.0, &s).unwrap().jump_fired);
        }
    }

    #[test]
    fn start_up_is_held_off_like_a_reset() {
        let cfg = OspmConfig { detector_gamma: 0.0, ..small_cfg() };
        let s = FirFilter::delta(cfg.l_s);
        let mut st = OspmState::with_init(cfg, &MetaInit::zeros(cfg.l_w, cfg.l_s), true).unwrap();
        st.set_h(FirFilter::new(vec![5.0; cfg.l_s])).unwrap();
        for _ in 0..cfg.detector_holdoff {
            assert!(!st.step(0.0, 0.0, 0.0, &s).unwrap().jump_fired);
        }
        assert_eq!(st.h_norm_history().count(), 0);
    }

    #[test]
    fn reset_rejects_wrong_dimensions() {
        let mut st = OspmState::new(small_cfg()).unwrap();
        assert!(st.reset_to(&MetaInit::zeros(3, 3)).is_err());
    }

    #[test]
    fn jump_in_canceller_norm_triggers_reset() {
        let cfg = OspmConfig { detector_gamma: 0.5, ..small_cfg() };
        let s = FirFilter::delta(cfg.l_s);
        let init = MetaInit::new(FirFilter::new(vec![0.25; cfg.l_w]), FirFilter::delta(cfg.l_s));
        let mut st = OspmState::with_init(cfg, &init, true).unwrap();
        for _ in 0..(cfg.detector_holdoff + cfg.detector_m + 2) {
            assert!(!st.step(0.0, 0.0, 0.0, &s).unwrap().jump_fired);
        }
        st.set_h(FirFilter::new(vec![1.0; cfg.l_s])).unwrap();
        let out = st.step(0.0, 0.0, 0.0, &s).unwrap();
        assert!(out.jump_fired);
        assert_eq!(st.h().norm(), 0.0);
        assert_eq!(st.w(), &init.phi);
        assert_eq!(st.resets(), 1);
    }

    #[test]
    fn reset_then_replay_matches_fresh_run() {
        let cfg = small_cfg();
        let s = synth_path(8, cfg.l_s, 0.7, 1).unwrap().ir;
        let init = MetaInit::new(
            FirFilter::new(NormalStream::new(1).take(cfg.l_w)),
            FirFilter::new(NormalStream::new(2).take(cfg.l_s)),
        );
        let mut rng = NormalStream::new(9);
        let warm: Vec<(f64, f64, f64)> =
            (0..300).map(|_| (rng.next_normal(), rng.next_normal(), rng.next_normal())).collect();
        let replay: Vec<(f64, f64, f64)> =
            (0..300).map(|_| (rng.next_normal(), rng.next_normal(), rng.next_normal())).collect();

        let mut a = OspmState::new(cfg).unwrap();
        for &(x, d, v) in &warm {
            a.step(x, d, v, &s).unwrap();
        }
        let mut b = a.clone();
        a.reset_to(&init).unwrap();
        b.set_w(init.phi.clone()).unwrap();
        b.set_s_hat(init.psi.clone()).unwrap();
        b.set_h(FirFilter::zeros(cfg.l_s)).unwrap();
        for &(x, d, v) in &replay {
            let oa = a.step(x, d, v, &s).unwrap();
            let ob = b.step(x, d, v, &s).unwrap();
            assert_eq!(oa, ob);
        }
    }

    #[test]
    fn aux_energy_accumulates_squares() {
        let cfg = small_cfg();
        let s = FirFilter::delta(cfg.l_s);
        let mut st = OspmState::new(cfg).unwrap();
        let mut rng = NormalStream::new(4);
        let mut total = 0.0;
        let mut last = 0.0;
        for _ in 0..1000 {
            let out = st.step(rng.next_normal(), rng.next_normal(), rng.next_normal(), &s).unwrap();
            total += out.v_m * out.v_m;
            assert!(st.aux_energy() >= last);
            last = st.aux_energy();
        }
        assert_eq!(st.aux_energy(), total);
    }

    #[test]
    fn identification_misalignment_contracts() {
        // w ≡ 0, x ≡ 0: only the auxiliary excites the plant.
        let cfg = OspmConfig {
            l_w: 8,
            l_s: 32,
            mu_s: 2e-4,
            mu_h: 0.0,
            mu_w: 0.0,
            c_aux: 1.0,
            eps: 1.0,
            delay_h: 0,
            ..OspmConfig::default()
        };
        let s = synth_path(12, cfg.l_s, 0.85, 2).unwrap().ir;
        let mut st = OspmState::new(cfg).unwrap();
        let mut rng = NormalStream::new(33);
        let mut prev = f64::INFINITY;
        let (mut ok, mut checks) = (0, 0);
        for k in 1..=50_000 {
            st.step(0.0, 0.0, rng.next_normal(), &s).unwrap();
            if k % 1000 == 0 {
                let mis = st.s_hat().distance(&s);
                checks += 1;
                if mis <= prev {
                    ok += 1;
                }
                prev = mis;
            }
        }
        assert!(ok as f64 >= 0.95 * checks as f64, "{ok}/{checks}");
    }
}
