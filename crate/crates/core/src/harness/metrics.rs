//! Sliding-window RMSE and the aggregations used in summaries.

use crate::rbd::N_DOF;

/// Per-joint RMSE over the trailing `window` errors at every index; the
/// first `window − 1` entries use the shorter prefix.
pub fn window_rmse(errors: &[[f64; N_DOF]], window: usize) -> Vec<[f64; N_DOF]> {
    assert!(window > 0, "window must be positive");
    let mut sums = [0.0; N_DOF];
    let mut out = Vec::with_capacity(errors.len());
    for (i, e) in errors.iter().enumerate() {
        for j in 0..N_DOF {
            sums[j] += e[j] * e[j];
        }
        if i >= window {
            let old = &errors[i - window];
            for j in 0..N_DOF {
                sums[j] -= old[j] * old[j];
            }
        }
        let len = (i + 1).min(window) as f64;
        let mut r = [0.0; N_DOF];
        for j in 0..N_DOF {
            // Running sums can dip below zero by rounding.
            r[j] = (sums[j].max(0.0) / len).sqrt();
        }
        out.push(r);
    }
    out
}

/// Mean of the per-joint window RMSEs.
pub fn joint_average(rmse: &[f64; N_DOF]) -> f64 {
    rmse.iter().sum::<f64>() / N_DOF as f64
}

/// Mean of `series` over its last half: the steady-state ("regime") value.
pub fn regime(series: &[f64]) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    mean(&series[series.len() / 2..])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation; zero for a single value.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}
