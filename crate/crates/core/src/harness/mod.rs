//! Experiment orchestration: multi-phase path-switch scenarios, report
//! metrics, the training-set diversity study and CSV export.

mod diversity;
pub mod metrics;
mod report;

pub use diversity::{diversity_study, DiversityRow, DiversityTemplate, TrainingSet};
pub use metrics::{level_db, sliding_mse_db, time_to_target, time_to_target_within, Series};
pub use report::{
    write_diversity_csv, write_report_csv, write_summary_csv, write_table_csv, write_training_log_csv,
};

use serde::{Deserialize, Serialize};

use crate::adaptive::{OspmConfig, OspmState};
use crate::dsp::{band_limited_reference, derive_seed, NormalStream, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::meta::MetaInit;
use crate::paths::PathPair;

/// How the controller starts and what happens at phase boundaries.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Start from zeros and zero all filters at every boundary.
    Zero,
    /// Start from zeros and keep every filter across boundaries.
    CarryOver,
    /// Start from `(Φ, Ψ)`; with the detector enabled, suspected path
    /// changes reset to the same pair.
    Meta(MetaInit),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub pair: PathPair,
    pub duration_sec: f64,
}

/// Analysis constants for [`MetricsReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub window_sec: f64,
    pub hop_sec: f64,
    /// Time-to-target level relative to each phase's disturbance power.
    pub target_rel_db: f64,
    pub hold_sec: f64,
    pub hold_margin_db: f64,
    /// Length of the pre-switch steady-state estimate.
    pub steady_sec: f64,
    /// Recovery target above the pre-switch steady state.
    pub recovery_margin_db: f64,
    /// Horizon for the mean-reduction scalar, from run start.
    pub reduction_horizon_sec: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window_sec: 0.5,
            hop_sec: 0.1,
            target_rel_db: -10.0,
            hold_sec: metrics::HOLD_SEC,
            hold_margin_db: metrics::HOLD_MARGIN_DB,
            steady_sec: 1.0,
            recovery_margin_db: 3.0,
            reduction_horizon_sec: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub phases: Vec<Phase>,
    pub band: (f64, f64),
    pub ospm: OspmConfig,
    pub init: InitMode,
    pub detector_enabled: bool,
    pub seed: u64,
    pub metrics: MetricsConfig,
    /// Keep the per-sample streams in the report.
    pub keep_raw: bool,
}

impl ScenarioConfig {
    pub fn new(phases: Vec<Phase>, ospm: OspmConfig, init: InitMode, seed: u64) -> Self {
        ScenarioConfig {
            phases,
            band: (200.0, 2000.0),
            ospm,
            init,
            detector_enabled: true,
            seed,
            metrics: MetricsConfig::default(),
            keep_raw: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ospm.validate()?;
        if self.phases.is_empty() {
            return Err(Error::Config("scenario needs at least one phase".into()));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if !(p.duration_sec > 0.0 && p.duration_sec.is_finite()) {
                return Err(Error::Config(format!("phase {} duration must be > 0", i + 1)));
            }
            if (p.duration_sec * SAMPLE_RATE).round() < 1.0 {
                return Err(Error::Config(format!("phase {} is shorter than one sample", i + 1)));
            }
            if p.pair.primary.sample_rate != SAMPLE_RATE || p.pair.secondary.sample_rate != SAMPLE_RATE {
                return Err(Error::Config(format!("phase {} paths are not at 16 kHz", i + 1)));
            }
        }
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi < SAMPLE_RATE / 2.0) {
            return Err(Error::Config(format!("noise band [{lo}, {hi}] Hz invalid")));
        }
        if let InitMode::Meta(init) = &self.init {
            if init.phi.len() != self.ospm.l_w || init.psi.len() != self.ospm.l_s {
                return Err(Error::Config(format!(
                    "meta init has ({}, {}) taps, controller expects ({}, {})",
                    init.phi.len(),
                    init.psi.len(),
                    self.ospm.l_w,
                    self.ospm.l_s
                )));
            }
        }
        let m = &self.metrics;
        if !(m.window_sec > 0.0 && m.hop_sec > 0.0) {
            return Err(Error::Config("metric window and hop must be > 0".into()));
        }
        Ok(())
    }

    /// Sample index at which each phase starts, plus the total length.
    pub fn boundaries(&self) -> (Vec<usize>, usize) {
        let mut starts = Vec::with_capacity(self.phases.len());
        let mut acc = 0usize;
        for p in &self.phases {
            starts.push(acc);
            acc += (p.duration_sec * SAMPLE_RATE).round() as usize;
        }
        (starts, acc)
    }
}

/// Per-sample streams of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawStreams {
    pub e: Vec<f64>,
    pub e_prime: Vec<f64>,
    pub v_m: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Sliding mean-square microphone residual.
    pub mse_db: Series,
    /// Sliding mean-square injected auxiliary noise, same time stamps.
    pub aux_power_db: Series,
    /// Seconds from each phase start to the target level.
    pub time_to_target: Vec<Option<f64>>,
    /// Seconds from each switch (phase 2 onwards) back to the pre-switch
    /// steady state plus margin.
    pub recovery_time: Vec<Option<f64>>,
    /// Σ v_m² per phase.
    pub aux_energy: Vec<f64>,
    /// Mean-square disturbance per phase, dB.
    pub disturbance_db: Vec<f64>,
    /// Disturbance-to-residual power ratio over the reduction horizon, dB.
    pub mean_reduction_db: f64,
    pub resets: usize,
    /// Seconds into the run where the controller diverged, if it did.
    pub diverged_at: Option<f64>,
    pub raw: Option<RawStreams>,
}

impl MetricsReport {
    pub fn total_aux_energy(&self) -> f64 {
        self.aux_energy.iter().sum()
    }
}

/// Runs the scenario sample by sample and summarizes it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let ospm = cfg.ospm;
    let (starts, total) = cfg.boundaries();
    let x = band_limited_reference(derive_seed(cfg.seed, 10), total, cfg.band.0, cfg.band.1)?;
    let mut aux = NormalStream::new(derive_seed(cfg.seed, 11));

    let mut state = match &cfg.init {
        InitMode::Meta(init) => OspmState::with_init(ospm, init, cfg.detector_enabled)?,
        InitMode::Zero | InitMode::CarryOver => OspmState::new(ospm)?,
    };

    let mut raw = RawStreams {
        e: Vec::with_capacity(total),
        e_prime: Vec::with_capacity(total),
        v_m: Vec::with_capacity(total),
        d: Vec::with_capacity(total),
    };
    let mut diverged = None;

    'phases: for (pi, phase) in cfg.phases.iter().enumerate() {
        let start = starts[pi];
        let end = starts.get(pi + 1).copied().unwrap_or(total);
        if pi > 0 && cfg.init == InitMode::Zero {
            state.zero_filters();
        }
        let primary = phase.pair.primary.taps();
        let secondary = phase.pair.secondary.resized(ospm.l_s).ir;
        for n in start..end {
            // Disturbance through the current primary path over the
            // continuous reference history.
            let kmax = primary.len().min(n + 1);
            let mut d = 0.0;
            for k in 0..kmax {
                d += primary[k] * x[n - k];
            }
            match state.step(x[n], d, aux.next_normal(), &secondary) {
                Ok(out) => {
                    raw.e.push(out.e);
                    raw.e_prime.push(out.e_prime);
                    raw.v_m.push(out.v_m);
                    raw.d.push(d);
                }
                Err(Error::Diverged { .. }) => {
                    diverged = Some(n as f64 / SAMPLE_RATE);
                    break 'phases;
                }
                Err(other) => return Err(other),
            }
        }
    }

    let mut report = summarize(cfg, &starts, raw);
    report.resets = state.resets();
    match diverged {
        Some(at_sec) => {
            report.diverged_at = Some(at_sec);
            Err(Error::ScenarioDiverged {
                at_sec,
                partial: Box::new(report),
            })
        }
        None => Ok(report),
    }
}

fn summarize(cfg: &ScenarioConfig, starts: &[usize], raw: RawStreams) -> MetricsReport {
    let m = &cfg.metrics;
    let fs = SAMPLE_RATE;
    let window = ((m.window_sec * fs).round() as usize).max(1);
    let hop = ((m.hop_sec * fs).round() as usize).max(1);
    let mse_db = sliding_mse_db(&raw.e, window, hop, fs);
    let aux_power_db = sliding_mse_db(&raw.v_m, window, hop, fs);
    let done = raw.e.len();
    let half = window as f64 / 2.0 / fs;

    let mut time_to_target = Vec::new();
    let mut recovery_time = Vec::new();
    let mut aux_energy = Vec::new();
    let mut disturbance_db = Vec::new();
    for (pi, &start) in starts.iter().enumerate() {
        let end = starts.get(pi + 1).copied().unwrap_or(usize::MAX).min(done);
        let start = start.min(done);
        let (t0, t1) = (start as f64 / fs, end as f64 / fs);
        // Only windows lying entirely inside the phase count.
        let (lo, hi) = (t0 + half - 1e-9, t1 - half + 1e-9);
        let d_db = level_db(&raw.d[start..end]);
        disturbance_db.push(d_db);
        aux_energy.push(raw.v_m[start..end].iter().map(|v| v * v).sum());
        time_to_target.push(
            time_to_target_within(&mse_db, d_db + m.target_rel_db, lo, hi, m.hold_sec, m.hold_margin_db)
                .map(|t| t - t0),
        );
        if pi > 0 {
            let steady = ((m.steady_sec * fs).round() as usize).min(start);
            let before = level_db(&raw.e[start - steady..start]);
            recovery_time.push(
                time_to_target_within(
                    &mse_db,
                    before + m.recovery_margin_db,
                    lo,
                    hi,
                    m.hold_sec,
                    m.hold_margin_db,
                )
                .map(|t| t - t0),
            );
        }
    }

    let horizon = ((m.reduction_horizon_sec * fs).round() as usize).min(done);
    let mean_reduction_db = level_db(&raw.d[..horizon]) - level_db(&raw.e[..horizon]);

    MetricsReport {
        mse_db,
        aux_power_db,
        time_to_target,
        recovery_time,
        aux_energy,
        disturbance_db,
        mean_reduction_db,
        resets: 0,
        diverged_at: None,
        raw: cfg.keep_raw.then_some(raw),
    }
}
