//! TOML run configuration for the `metanc` binary.
//!
//! One file holds every constant a command needs. Example:
//!
//! ```toml
//! seed = 7
//!
//! [ospm]          # OspmConfig fields; omitted ones keep `OspmConfig::default`
//! l_w = 192
//! # ...
//!
//! [meta]          # MetaConfig fields, same rule
//! # ...
//!
//! [[train]]
//! primary   = { kind = "family", base_seed = 1, taps = 256, decay = 0.97, delay = 20, seed = 11, spread = 0.5 }
//! secondary = { kind = "file", path = "s1.txt" }
//!
//! [scenario]
//! init = "meta"              # zero | carry_over | meta
//! meta_init = "init.txt"
//! detector = true
//! [[scenario.phases]]
//! duration_sec = 20.0
//! primary   = { kind = "synth", seed = 3, taps = 256, decay = 0.97, delay = 20 }
//! secondary = { kind = "synth", seed = 4, taps = 128, decay = 0.9, delay = 3 }
//! ```
//!
//! Relative file paths resolve against the config file's directory.
//!
//! Seeds: the root `seed` (or `--seed`) replaces `meta.seed` and the
//! scenario seed; the diversity study derives per-job seeds from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::OspmConfig;
use crate::error::{Error, Result};
use crate::harness::{DiversityTemplate, InitMode, MetricsConfig, Phase, ScenarioConfig, TrainingSet};
use crate::meta::{MetaConfig, MetaInit};
use crate::paths::{load_ir, synth_path, AcousticPath, PathPair, SurrogateFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    File {
        path: PathBuf,
    },
    Synth {
        seed: u64,
        taps: usize,
        decay: f64,
        delay: usize,
    },
    Family {
        base_seed: u64,
        taps: usize,
        decay: f64,
        delay: usize,
        seed: u64,
        spread: f64,
    },
    /// Prototype plus weighted deviations, `terms = [[seed, weight], …]`.
    Blend {
        base_seed: u64,
        taps: usize,
        decay: f64,
        delay: usize,
        terms: Vec<(u64, f64)>,
    },
}

impl PathSpec {
    pub fn resolve(&self, base_dir: &Path) -> Result<AcousticPath> {
        match self {
            PathSpec::File { path } => load_ir(base_dir.join(path)),
            PathSpec::Synth { seed, taps, decay, delay } => {
                synth_path(*seed, *taps, *decay, *delay).map_err(as_config)
            }
            PathSpec::Family { base_seed, taps, decay, delay, seed, spread } => SurrogateFamily {
                base_seed: *base_seed,
                taps: *taps,
                decay: *decay,
                delay: *delay,
            }
            .member(*seed, *spread)
            .map_err(as_config),
            PathSpec::Blend { base_seed, taps, decay, delay, terms } => SurrogateFamily {
                base_seed: *base_seed,
                taps: *taps,
                decay: *decay,
                delay: *delay,
            }
            .blend(terms)
            .map_err(as_config),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Contract(msg) => Error::Config(msg),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub primary: PathSpec,
    pub secondary: PathSpec,
    #[serde(default)]
    pub label: Option<String>,
}

impl PairSpec {
    pub fn resolve(&self, base_dir: &Path) -> Result<PathPair> {
        let mut primary = self.primary.resolve(base_dir)?;
        let mut secondary = self.secondary.resolve(base_dir)?;
        if let Some(label) = &self.label {
            primary.label = format!("{label}/primary");
            secondary.label = format!("{label}/secondary");
        }
        PathPair::new(primary, secondary).map_err(as_config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zero,
    CarryOver,
    Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub duration_sec: f64,
    pub primary: PathSpec,
    pub secondary: PathSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub phases: Vec<PhaseSpec>,
    pub init: InitKind,
    #[serde(default)]
    pub meta_init: Option<PathBuf>,
    #[serde(default = "yes")]
    pub detector: bool,
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn yes() -> bool {
    true
}

fn default_band() -> [f64; 2] {
    [200.0, 2000.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub name: String,
    pub pairs: Vec<PairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversitySpec {
    pub sets: Vec<SetSpec>,
    pub heldout: Vec<PairSpec>,
    #[serde(default = "five")]
    pub duration_sec: f64,
    #[serde(default = "yes")]
    pub detector: bool,
    #[serde(default = "default_band")]
    pub band: [f64; 2],
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn five() -> f64 {
    5.0
}

/// Whole-file configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub ospm: Option<OspmConfig>,
    #[serde(default)]
    pub meta: Option<MetaConfig>,
    #[serde(default)]
    pub train: Vec<PairSpec>,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub diversity: Option<DiversitySpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, dir))
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    fn require<'a, T>(v: &'a Option<T>, section: &str) -> Result<&'a T> {
        v.as_ref()
            .ok_or_else(|| Error::Config(format!("missing [{section}] section")))
    }

    pub fn ospm(&self) -> Result<OspmConfig> {
        let o = *Self::require(&self.ospm, "ospm")?;
        o.validate()?;
        Ok(o)
    }

    /// Meta settings with the root seed applied.
    pub fn meta(&self) -> Result<MetaConfig> {
        let mut m = Self::require(&self.meta, "meta")?.clone();
        m.seed = self.seed;
        m.validate()?;
        Ok(m)
    }

    pub fn training_pairs(&self, base_dir: &Path) -> Result<Vec<PathPair>> {
        if self.train.is_empty() {
            return Err(Error::Config("no [[train]] pairs listed".into()));
        }
        self.train.iter().map(|p| p.resolve(base_dir)).collect()
    }

    pub fn scenario(&self, base_dir: &Path) -> Result<ScenarioConfig> {
        let spec = Self::require(&self.scenario, "scenario")?;
        let ospm = self.ospm()?;
        let phases = spec
            .phases
            .iter()
            .map(|p| {
                let pair = PathPair::new(p.primary.resolve(base_dir)?, p.secondary.resolve(base_dir)?)
                    .map_err(as_config)?;
                Ok(Phase { pair, duration_sec: p.duration_sec })
            })
            .collect::<Result<Vec<_>>>()?;
        let init = match spec.init {
            InitKind::Zero => InitMode::Zero,
            InitKind::CarryOver => InitMode::CarryOver,
            InitKind::Meta => {
                let path = spec
                    .meta_init
                    .as_ref()
                    .ok_or_else(|| Error::Config("init = \"meta\" requires meta_init".into()))?;
                InitMode::Meta(MetaInit::load(base_dir.join(path))?)
            }
        };
        let mut cfg = ScenarioConfig::new(phases, ospm, init, self.seed);
        cfg.band = (spec.band[0], spec.band[1]);
        cfg.detector_enabled = spec.detector;
        cfg.metrics = spec.metrics;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn diversity(&self, base_dir: &Path) -> Result<(Vec<TrainingSet>, Vec<PathPair>, DiversityTemplate)> {
        let spec = Self::require(&self.diversity, "diversity")?;
        if spec.sets.len() < 2 {
            return Err(Error::Config("diversity study needs at least two sets".into()));
        }
        let sets = spec
            .sets
            .iter()
            .map(|s| {
                Ok(TrainingSet {
                    name: s.name.clone(),
                    pairs: s.pairs.iter().map(|p| p.resolve(base_dir)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let heldout = spec
            .heldout
            .iter()
            .map(|p| p.resolve(base_dir))
            .collect::<Result<Vec<_>>>()?;
        let template = DiversityTemplate {
            ospm: self.ospm()?,
            band: (spec.band[0], spec.band[1]),
            duration_sec: spec.duration_sec,
            detector_enabled: spec.detector,
            seed: self.seed,
            metrics: spec.metrics,
        };
        Ok((sets, heldout, template))
    }
}
