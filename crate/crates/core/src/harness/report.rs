//! CSV writers. Floats use Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::path::Path;

use super::{DiversityRow, MetricsReport};
use crate::error::{Error, Result};
use crate::meta::EpochLog;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |t| t.to_string())
}

/// `t_sec,mse_db,aux_power_db`, one row per sliding window.
pub fn write_report_csv(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t_sec", "mse_db", "aux_power_db"])
        .map_err(|e| csv_err(path, e))?;
    for (&(t, mse), &(_, aux)) in report.mse_db.iter().zip(&report.aux_power_db) {
        w.write_record([t.to_string(), mse.to_string(), aux.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scalar metrics as `metric,value` rows; absent values are `NA`.
pub fn write_summary_csv(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut rows: Vec<(String, String)> = Vec::new();
    for (i, t) in report.time_to_target.iter().enumerate() {
        rows.push((format!("time_to_target_phase{}", i + 1), opt(*t)));
    }
    for (i, t) in report.recovery_time.iter().enumerate() {
        rows.push((format!("recovery_time_switch{}", i + 1), opt(*t)));
    }
    for (i, a) in report.aux_energy.iter().enumerate() {
        rows.push((format!("aux_energy_phase{}", i + 1), a.to_string()));
    }
    for (i, d) in report.disturbance_db.iter().enumerate() {
        rows.push((format!("disturbance_db_phase{}", i + 1), d.to_string()));
    }
    rows.push(("aux_energy_total".into(), report.total_aux_energy().to_string()));
    rows.push(("mean_reduction_db".into(), report.mean_reduction_db.to_string()));
    rows.push(("resets".into(), report.resets.to_string()));
    if let Some(t) = report.diverged_at {
        rows.push(("diverged_at".into(), t.to_string()));
    }

    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["metric", "value"]).map_err(|e| csv_err(path, e))?;
    for (k, v) in rows {
        w.write_record([k, v]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Meta-training progress as `epoch,task,val_mse,val_mse_sp`.
pub fn write_training_log_csv(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    write_table_csv(
        path,
        &["epoch", "task", "val_mse", "val_mse_sp"],
        log.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.task.to_string(),
                r.val_mse.to_string(),
                r.val_mse_sp.to_string(),
            ]
        }),
    )
}

/// Header plus preformatted rows.
pub fn write_table_csv<I>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `set,D_pri_db,D_sec_db,mean_reduction_db`.
pub fn write_diversity_csv(rows: &[DiversityRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["set", "D_pri_db", "D_sec_db", "mean_reduction_db"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.set.clone(),
            r.d_pri_db.to_string(),
            r.d_sec_db.to_string(),
            r.mean_reduction_db.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
