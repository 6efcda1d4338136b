//! Acoustic paths: ingestion, surrogate synthesis, magnitude responses and
//! the log-spectral diversity metrics.
//!
//! Two on-disk impulse-response formats are accepted by [`load_ir`]:
//!
//! * text: UTF-8, one decimal coefficient per line, blank lines and lines
//!   starting with `#` ignored;
//! * WAVE (`.wav`): single channel, 32-bit float PCM, 16 kHz.
//!
//! [`save_ir`] writes the text format with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::dsp::{derive_seed, FirFilter, NormalStream, DB_FLOOR, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPath {
    pub ir: FirFilter,
    pub sample_rate: f64,
    pub label: String,
}

impl AcousticPath {
    pub fn new(ir: FirFilter, label: impl Into<String>) -> Result<Self> {
        Self::with_rate(ir, SAMPLE_RATE, label)
    }

    pub fn with_rate(ir: FirFilter, sample_rate: f64, label: impl Into<String>) -> Result<Self> {
        if ir.is_empty() {
            return Err(Error::contract("impulse response is empty"));
        }
        if !ir.is_finite() {
            return Err(Error::contract("impulse response has non-finite taps"));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::contract(format!("sample rate must be positive, got {sample_rate}")));
        }
        Ok(AcousticPath {
            ir,
            sample_rate,
            label: label.into(),
        })
    }

    pub fn taps(&self) -> &[f64] {
        self.ir.coeffs()
    }

    pub fn len(&self) -> usize {
        self.ir.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ir.is_empty()
    }

    /// Copy truncated or zero-padded to exactly `len` taps.
    pub fn resized(&self, len: usize) -> AcousticPath {
        let mut taps = self.taps().to_vec();
        taps.resize(len, 0.0);
        AcousticPath {
            ir: FirFilter::new(taps),
            sample_rate: self.sample_rate,
            label: self.label.clone(),
        }
    }
}

/// One acoustic condition: the noise-to-mic and speaker-to-mic paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub primary: AcousticPath,
    pub secondary: AcousticPath,
}

impl PathPair {
    pub fn new(primary: AcousticPath, secondary: AcousticPath) -> Result<Self> {
        if primary.sample_rate != secondary.sample_rate {
            return Err(Error::contract(format!(
                "primary at {} Hz but secondary at {} Hz",
                primary.sample_rate, secondary.sample_rate
            )));
        }
        Ok(PathPair { primary, secondary })
    }

    /// Same coefficients on both paths (labels ignored).
    pub fn same_responses(&self, other: &PathPair) -> bool {
        self.primary.ir == other.primary.ir && self.secondary.ir == other.secondary.ir
    }
}

// ---------------------------------------------------------------------------
// File ingestion

pub fn load_ir(path: impl AsRef<Path>) -> Result<AcousticPath> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let (taps, rate) = if is_wav {
        read_wav(path)?
    } else {
        (read_text(path)?, SAMPLE_RATE)
    };
    AcousticPath::with_rate(FirFilter::new(taps), rate, label)
}

fn read_text(path: &Path) -> Result<Vec<f64>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut taps = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("line {}: cannot parse {line:?} as a number", lineno + 1),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                index: taps.len(),
            });
        }
        taps.push(v);
    }
    if taps.is_empty() {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: "no coefficients".into(),
        });
    }
    Ok(taps)
}

fn read_wav(path: &Path) -> Result<(Vec<f64>, f64)> {
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => malformed(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(malformed(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Float || spec.bits_per_sample != 32 {
        return Err(malformed("expected 32-bit float PCM".into()));
    }
    if f64::from(spec.sample_rate) != SAMPLE_RATE {
        return Err(malformed(format!("expected 16000 Hz, found {} Hz", spec.sample_rate)));
    }
    let mut taps = Vec::new();
    for s in reader.into_samples::<f32>() {
        let v = s.map_err(|e| malformed(e.to_string()))?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                index: taps.len(),
            });
        }
        taps.push(f64::from(v));
    }
    if taps.is_empty() {
        return Err(malformed("no samples".into()));
    }
    Ok((taps, f64::from(spec.sample_rate)))
}

/// Text rendering used by [`save_ir`]: 17 significant digits per line.
pub fn format_ir(p: &AcousticPath) -> String {
    let mut out = String::with_capacity(p.len() * 26);
    if !p.label.is_empty() {
        let _ = writeln!(out, "# {}", p.label.replace('\n', " "));
    }
    for c in p.taps() {
        let _ = writeln!(out, "{c:.16e}");
    }
    out
}

pub fn save_ir(p: &AcousticPath, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_ir(p)).map_err(|e| Error::io(path, e))
}

/// Writes the WAVE variant. Taps are narrowed to `f32`.
pub fn save_ir_wav(p: &AcousticPath, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: p.sample_rate as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &c in p.taps() {
        w.write_sample(c as f32).map_err(to_err)?;
    }
    w.finalize().map_err(to_err)
}

// ---------------------------------------------------------------------------
// Surrogate paths

/// Exponentially decaying seeded noise with a bulk delay, unit energy.
///
/// `ir[k] = 0` for `k < delay`, otherwise `g(k)·decay^(k−delay)` with `g`
/// drawn from the seeded normal stream, then scaled to `‖ir‖₂ = 1`.
pub fn synth_path(seed: u64, taps: usize, decay: f64, delay: usize) -> Result<AcousticPath> {
    if taps == 0 {
        return Err(Error::contract("surrogate path needs at least one tap"));
    }
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::contract(format!("decay {decay} not in (0, 1)")));
    }
    if delay >= taps {
        return Err(Error::contract(format!("delay {delay} must be below tap count {taps}")));
    }
    let mut rng = NormalStream::new(seed);
    let mut ir = vec![0.0; taps];
    let mut env = 1.0;
    for c in ir.iter_mut().skip(delay) {
        *c = rng.next_normal() * env;
        env *= decay;
    }
    normalize(&mut ir);
    AcousticPath::new(FirFilter::new(ir), format!("synth/{seed}"))
}

fn normalize(ir: &mut [f64]) {
    let norm = ir.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in ir.iter_mut() {
            *c /= norm;
        }
    }
}

/// A population of related surrogate paths: one shared prototype plus
/// member-specific deviations. `spread` scales the deviation relative to
/// the (unit-energy) prototype; the result is renormalized to unit energy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurrogateFamily {
    pub base_seed: u64,
    pub taps: usize,
    pub decay: f64,
    pub delay: usize,
}

impl SurrogateFamily {
    /// Long, slowly decaying noise-to-ear responses.
    pub const PRIMARY: SurrogateFamily = SurrogateFamily {
        base_seed: 1,
        taps: 256,
        decay: 0.97,
        delay: 20,
    };

    /// Short speaker-to-ear responses.
    pub const SECONDARY: SurrogateFamily = SurrogateFamily {
        base_seed: 2,
        taps: 128,
        decay: 0.9,
        delay: 3,
    };

    /// Member spread of the stock surrogate population.
    pub const SPREAD: f64 = 0.5;

    /// One pair of the stock population: independent primary and
    /// secondary deviations drawn from `seed`.
    pub fn stock_pair(seed: u64) -> Result<PathPair> {
        let primary = Self::PRIMARY.member(derive_seed(seed, 1), Self::SPREAD)?;
        let secondary = Self::SECONDARY.member(derive_seed(seed, 2), Self::SPREAD)?;
        PathPair::new(primary, secondary)
    }

    pub fn prototype(&self) -> Result<AcousticPath> {
        synth_path(self.base_seed, self.taps, self.decay, self.delay)
    }

    pub fn member(&self, seed: u64, spread: f64) -> Result<AcousticPath> {
        let mut path = self.blend(&[(seed, spread)])?;
        path.label = format!("family{}/{seed}@{spread}", self.base_seed);
        Ok(path)
    }

    /// Prototype plus several weighted deviations, renormalized. A shared
    /// anchor term with a small per-member jitter gives a compact cluster
    /// away from the prototype.
    pub fn blend(&self, terms: &[(u64, f64)]) -> Result<AcousticPath> {
        let mut ir = self.prototype()?.ir.into_coeffs();
        for &(seed, spread) in terms {
            if !(spread >= 0.0 && spread.is_finite()) {
                return Err(Error::contract(format!("spread {spread} must be finite and >= 0")));
            }
            let dev = synth_path(seed, self.taps, self.decay, self.delay)?;
            for (c, d) in ir.iter_mut().zip(dev.taps()) {
                *c += spread * d;
            }
        }
        normalize(&mut ir);
        let label = terms
            .iter()
            .map(|(seed, spread)| format!("{seed}@{spread}"))
            .collect::<Vec<_>>()
            .join("+");
        AcousticPath::new(FirFilter::new(ir), format!("family{}/{label}", self.base_seed))
    }
}

// ---------------------------------------------------------------------------
// Spectra and diversity

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    freqs: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() {
            return Err(Error::contract("frequency grid is empty"));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::contract("grid frequencies must be strictly increasing"));
        }
        if !(freqs[0] > 0.0) {
            return Err(Error::contract("grid frequencies must be positive"));
        }
        Ok(FrequencyGrid { freqs })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// The diversity grid: 64 log-spaced points over 100–2000 Hz.
    pub fn diversity() -> Self {
        log_grid(100.0, 2000.0, 64).expect("constant grid is valid")
    }
}

/// `m` geometrically spaced frequencies from `f_min` to `f_max` inclusive.
pub fn log_grid(f_min: f64, f_max: f64, m: usize) -> Result<FrequencyGrid> {
    if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) || m < 2 {
        return Err(Error::contract(format!(
            "log grid needs 0 < f_min < f_max and M >= 2, got [{f_min}, {f_max}], M = {m}"
        )));
    }
    let ratio = (f_max / f_min).ln();
    let mut freqs: Vec<f64> = (0..m)
        .map(|i| f_min * (ratio * i as f64 / (m - 1) as f64).exp())
        .collect();
    freqs[0] = f_min;
    freqs[m - 1] = f_max;
    FrequencyGrid::new(freqs)
}

/// Log-magnitude `20·log₁₀|H(f)|` by direct DTFT at each grid point,
/// floored at −300 dB.
pub fn magnitude_db(p: &AcousticPath, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    let nyquist = p.sample_rate / 2.0;
    if grid.freqs().iter().any(|&f| f >= nyquist) {
        return Err(Error::contract(format!(
            "grid reaches or exceeds Nyquist ({nyquist} Hz)"
        )));
    }
    Ok(grid
        .freqs()
        .iter()
        .map(|&f| {
            let omega = std::f64::consts::TAU * f / p.sample_rate;
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &h) in p.taps().iter().enumerate() {
                let (s, c) = (omega * k as f64).sin_cos();
                re += h * c;
                im -= h * s;
            }
            let mag = re.hypot(im);
            if mag > 0.0 {
                (20.0 * mag.log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect())
}

/// RMS difference of two log-magnitude vectors, `‖a − b‖₂ / √M`.
pub fn lsd_of_spectra(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

pub fn lsd(a: &AcousticPath, b: &AcousticPath, grid: &FrequencyGrid) -> Result<f64> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::contract("paths have different sample rates"));
    }
    Ok(lsd_of_spectra(&magnitude_db(a, grid)?, &magnitude_db(b, grid)?))
}

/// Mean pairwise LSD of a path set.
pub fn dispersion(set: &[AcousticPath], grid: &FrequencyGrid) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::contract(format!(
            "dispersion needs at least two paths, got {}",
            set.len()
        )));
    }
    if set.windows(2).any(|w| w[0].sample_rate != w[1].sample_rate) {
        return Err(Error::contract("paths have different sample rates"));
    }
    let spectra = set
        .iter()
        .map(|p| magnitude_db(p, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(dispersion_of_spectra(&spectra))
}

pub(crate) fn dispersion_of_spectra(spectra: &[Vec<f64>]) -> f64 {
    let n = spectra.len();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += lsd_of_spectra(&spectra[i], &spectra[j]);
        }
    }
    2.0 * sum / (n * (n - 1)) as f64
}
