//! Report metrics computed from raw residual and injection streams.

use crate::dsp::{power_db, DB_FLOOR};

/// `(time in seconds, level in dB)` points, strictly increasing in time.
pub type Series = Vec<(f64, f64)>;

/// Sliding mean-square level in dB.
///
/// Window `k` covers samples `[k·hop, k·hop + window)` and is stamped at
/// its centre. Levels are floored at −300 dB. A window longer than the
/// signal yields an empty series.
pub fn sliding_mse_db(e: &[f64], window: usize, hop: usize, sample_rate: f64) -> Series {
    assert!(window >= 1 && hop >= 1, "window and hop must be >= 1");
    if window > e.len() {
        return Vec::new();
    }
    let count = (e.len() - window) / hop + 1;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        let ms = e[start..start + window].iter().map(|v| v * v).sum::<f64>() / window as f64;
        let t = (start as f64 + window as f64 / 2.0) / sample_rate;
        out.push((t, power_db(ms)));
    }
    out
}

/// Default hold requirement for [`time_to_target`]: one second within
/// 3 dB of the target.
pub const HOLD_SEC: f64 = 1.0;
pub const HOLD_MARGIN_DB: f64 = 3.0;

/// First time `t ≥ phase_start` with level `≤ target_db` that stays within
/// `target_db + 3 dB` for the next second.
pub fn time_to_target(series: &[(f64, f64)], target_db: f64, phase_start: f64) -> Option<f64> {
    time_to_target_within(series, target_db, phase_start, f64::INFINITY, HOLD_SEC, HOLD_MARGIN_DB)
}

/// [`time_to_target`] restricted to points before `phase_end`, with an
/// explicit hold length and margin. The hold is checked over the points
/// available before `phase_end`.
pub fn time_to_target_within(
    series: &[(f64, f64)],
    target_db: f64,
    phase_start: f64,
    phase_end: f64,
    hold_sec: f64,
    margin_db: f64,
) -> Option<f64> {
    let lo = series.partition_point(|&(t, _)| t < phase_start);
    let hi = series.partition_point(|&(t, _)| t < phase_end);
    let pts = &series[lo..hi];
    // Index of the next point above the hold ceiling, scanning backwards.
    let ceiling = target_db + margin_db;
    let mut next_violation = vec![pts.len(); pts.len() + 1];
    for i in (0..pts.len()).rev() {
        next_violation[i] = if pts[i].1 > ceiling { i } else { next_violation[i + 1] };
    }
    for (i, &(t, level)) in pts.iter().enumerate() {
        if level > target_db {
            continue;
        }
        let v = next_violation[i];
        if v == pts.len() || pts[v].0 > t + hold_sec {
            return Some(t);
        }
    }
    None
}

/// Mean-square level in dB of a slice; floor for empty input.
pub fn level_db(x: &[f64]) -> f64 {
    if x.is_empty() {
        return DB_FLOOR;
    }
    power_db(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::NormalStream;

    #[test]
    fn constant_unit_error_is_zero_db() {
        let s = sliding_mse_db(&vec![1.0; 1000], 100, 10, 1000.0);
        assert!(s.iter().all(|&(_, v)| v == 0.0));
        assert_eq!(s.len(), 91);
    }

    #[test]
    fn scaling_by_ten_adds_twenty_db() {
        let e = NormalStream::new(1).take(2000);
        let e10: Vec<f64> = e.iter().map(|v| 10.0 * v).collect();
        let a = sliding_mse_db(&e, 200, 50, 16000.0);
        let b = sliding_mse_db(&e10, 200, 50, 16000.0);
        for ((ta, va), (tb, vb)) in a.iter().zip(&b) {
            assert_eq!(ta, tb);
            assert!((vb - va - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oversize_window_is_empty() {
        assert!(sliding_mse_db(&[1.0; 10], 11, 1, 16000.0).is_empty());
    }

    #[test]
    fn zeros_hit_the_floor() {
        let s = sliding_mse_db(&[0.0; 10], 5, 5, 16000.0);
        assert!(s.iter().all(|&(_, v)| v == DB_FLOOR));
    }

    #[test]
    fn one_second_run_has_six_points() {
        let s = sliding_mse_db(&vec![0.1; 16000], 8000, 1600, 16000.0);
        assert_eq!(s.len(), 6);
        assert!((s[0].0 - 0.25).abs() < 1e-12);
    }

    fn staircase() -> Series {
        (0..300)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, if t < 12.0 - 1e-9 { 0.0 } else { -20.0 })
            })
            .collect()
    }

    #[test]
    fn always_below_returns_phase_start() {
        let s: Series = (0..50).map(|i| (i as f64 * 0.1, -30.0)).collect();
        assert_eq!(time_to_target(&s, -10.0, 0.0), Some(0.0));
    }

    #[test]
    fn never_below_is_absent() {
        let s: Series = (0..50).map(|i| (i as f64 * 0.1, 0.0)).collect();
        assert_eq!(time_to_target(&s, -10.0, 0.0), None);
    }

    #[test]
    fn staircase_drop_at_twelve_seconds() {
        let t = time_to_target(&staircase(), -10.0, 0.0).unwrap();
        assert!((t - 12.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn single_dip_is_debounced() {
        let mut s: Series = (0..100).map(|i| (i as f64 * 0.1, 0.0)).collect();
        s[20].1 = -20.0;
        s[60..].iter_mut().for_each(|p| p.1 = -20.0);
        let t = time_to_target(&s, -10.0, 0.0).unwrap();
        assert!((t - 6.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn margin_tolerates_small_rebound() {
        let mut s: Series = (0..100).map(|i| (i as f64 * 0.1, -12.0)).collect();
        s[3].1 = -8.0; // inside target + 3 dB
        assert_eq!(time_to_target(&s, -10.0, 0.0), Some(0.0));
    }
}
