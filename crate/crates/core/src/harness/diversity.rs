use crate::adaptive::OspmConfig;
use crate::error::{Error, Result};
use crate::jobs::{job_seed, map_jobs};
use crate::meta::{meta_train, MetaConfig, MetaInit};
use crate::paths::{dispersion, AcousticPath, FrequencyGrid, PathPair};

use super::{run_scenario, InitMode, MetricsConfig, Phase, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub name: String,
    pub pairs: Vec<PathPair>,
}

/// Evaluation settings shared by every held-out run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityTemplate {
    pub ospm: OspmConfig,
    pub band: (f64, f64),
    pub duration_sec: f64,
    pub detector_enabled: bool,
    pub seed: u64,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityRow {
    pub set: String,
    pub d_pri_db: f64,
    pub d_sec_db: f64,
    pub mean_reduction_db: f64,
    /// Per held-out pair, in input order.
    pub reductions_db: Vec<f64>,
    pub init: MetaInit,
}

/// For each training set: primary and secondary dispersion, a meta-trained
/// initialization, and the reduction it achieves over the first
/// `reduction_horizon_sec` of a run on every held-out pair, averaged.
///
/// Held-out runs of one set share seeds with the other sets, so rows
/// differ only through the training data.
pub fn diversity_study(
    sets: &[TrainingSet],
    heldout: &[PathPair],
    meta_cfg: &MetaConfig,
    template: &DiversityTemplate,
) -> Result<Vec<DiversityRow>> {
    if heldout.is_empty() {
        return Err(Error::contract("diversity study needs held-out pairs"));
    }
    for set in sets {
        if set.pairs.len() < 2 {
            return Err(Error::contract(format!(
                "training set {} needs at least two pairs",
                set.name
            )));
        }
        for p in &set.pairs {
            if heldout.iter().any(|h| h.same_responses(p)) {
                return Err(Error::contract(format!(
                    "training set {} overlaps the held-out pairs",
                    set.name
                )));
            }
        }
    }
    let grid = FrequencyGrid::diversity();

    let trained = map_jobs(sets, |_, set| -> Result<(f64, f64, MetaInit)> {
        let pri: Vec<AcousticPath> = set.pairs.iter().map(|p| p.primary.clone()).collect();
        let sec: Vec<AcousticPath> = set.pairs.iter().map(|p| p.secondary.clone()).collect();
        let d_pri = dispersion(&pri, &grid)?;
        let d_sec = dispersion(&sec, &grid)?;
        let init = meta_train(&set.pairs, meta_cfg)?.init;
        Ok((d_pri, d_sec, init))
    });
    let trained = trained.into_iter().collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..sets.len())
        .flat_map(|s| (0..heldout.len()).map(move |h| (s, h)))
        .collect();
    let reductions = map_jobs(&jobs, |_, &(s, h)| -> Result<f64> {
        let mut cfg = ScenarioConfig::new(
            vec![Phase {
                pair: heldout[h].clone(),
                duration_sec: template.duration_sec,
            }],
            template.ospm,
            InitMode::Meta(trained[s].2.clone()),
            job_seed(template.seed, h),
        );
        cfg.band = template.band;
        cfg.detector_enabled = template.detector_enabled;
        cfg.metrics = template.metrics;
        Ok(run_scenario(&cfg)?.mean_reduction_db)
    });
    let reductions = reductions.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(sets
        .iter()
        .zip(trained)
        .enumerate()
        .map(|(s, (set, (d_pri, d_sec, init)))| {
            let per: Vec<f64> = reductions[s * heldout.len()..(s + 1) * heldout.len()].to_vec();
            DiversityRow {
                set: set.name.clone(),
                d_pri_db: d_pri,
                d_sec_db: d_sec,
                mean_reduction_db: per.iter().sum::<f64>() / per.len() as f64,
                reductions_db: per,
                init,
            }
        })
        .collect())
}
