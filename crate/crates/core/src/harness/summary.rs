//! Aggregation of per-fold results into metric curves and a summary table.
//!
//! Every fold of every seed is one repetition. Curves are averaged per
//! sample index; two spreads are reported, one across seeds (of the
//! fold-averaged curve) and one pooled over all repetitions.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rbd::N_DOF;
use crate::semiparametric::EstimatorKind;

use super::dataset::csv_io;
use super::metrics::{mean, regime, std_dev};
use super::protocol::FOLD_HEADER;

/// Window RMSE of one fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldSeries {
    pub time_s: Vec<f64>,
    pub per_joint: Vec<[f64; N_DOF]>,
    pub average: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    pub seeds: Vec<u64>,
    /// `regimes[s][k]`: regime RMSE of fold `k` for seed `seeds[s]`.
    pub regimes: Vec<Vec<f64>>,
    pub regime_mean: f64,
    /// Pooled over every (seed, fold) repetition.
    pub regime_std: f64,
    /// Spread of the per-seed means.
    pub regime_std_seeds: f64,
    /// Mean over seeds of the within-seed spread across folds.
    pub regime_std_folds: f64,
    pub regime_per_joint: [f64; N_DOF],
}

impl EstimatorSummary {
    pub fn n_series(&self) -> usize {
        self.regimes.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub estimators: Vec<EstimatorSummary>,
}

impl Summary {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.kind == kind)
    }
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "estimator",
    "n_seeds",
    "n_series",
    "regime_rmse_mean",
    "regime_rmse_std",
    "regime_rmse_std_seeds",
    "regime_rmse_std_folds",
    "regime_joint1",
    "regime_joint2",
];

pub const METRICS_HEADER: [&str; 5] = [
    "sample_index",
    "time_s",
    "rmse_window_mean",
    "rmse_window_std",
    "rmse_window_std_folds",
];

pub fn read_fold(path: &Path) -> Result<FoldSeries> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != FOLD_HEADER {
        return Err(Error::parse(path, format!("unexpected header {header:?}")));
    }
    let mut s = FoldSeries {
        time_s: Vec::new(),
        per_joint: Vec::new(),
        average: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let v = rec
            .iter()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, e))?;
        if v.len() != FOLD_HEADER.len() {
            return Err(Error::parse(path, "short row"));
        }
        s.time_s.push(v[1]);
        s.per_joint.push([v[4], v[5]]);
        s.average.push(v[6]);
    }
    Ok(s)
}

fn numbered_entries(dir: &Path, prefix: &str, suffix: &str) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(n) = name
            .strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(suffix))
            .and_then(|n| n.parse::<u64>().ok())
        {
            out.push((n, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Fold series per seed for one estimator directory.
pub fn load_estimator(dir: &Path) -> Result<Vec<(u64, Vec<FoldSeries>)>> {
    let mut seeds = Vec::new();
    for (seed, seed_dir) in numbered_entries(dir, "seed_", "")? {
        if !seed_dir.is_dir() {
            continue;
        }
        let folds = numbered_entries(&seed_dir, "fold_", ".csv")?
            .into_iter()
            .map(|(_, p)| read_fold(&p))
            .collect::<Result<Vec<_>>>()?;
        if !folds.is_empty() {
            seeds.push((seed, folds));
        }
    }
    Ok(seeds)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-index mean, spread across seeds and pooled spread of `pick(fold)`.
fn curve(
    seeds: &[(u64, Vec<FoldSeries>)],
    pick: impl Fn(&FoldSeries, usize) -> f64,
) -> Vec<(usize, f64, f64, f64, f64)> {
    let len = seeds
        .iter()
        .flat_map(|(_, f)| f.iter().map(|s| s.average.len()))
        .max()
        .unwrap_or(0);
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let mut all = Vec::new();
        let mut seed_means = Vec::new();
        let mut time = f64::NAN;
        for (_, folds) in seeds {
            let vals: Vec<f64> = folds
                .iter()
                .filter(|f| i < f.average.len())
                .map(|f| {
                    time = f.time_s[i];
                    pick(f, i)
                })
                .collect();
            if !vals.is_empty() {
                seed_means.push(mean(&vals));
                all.extend(vals);
            }
        }
        rows.push((i, time, mean(&all), std_dev(&seed_means), std_dev(&all)));
    }
    rows
}

fn curve_rows(c: Vec<(usize, f64, f64, f64, f64)>) -> impl Iterator<Item = Vec<String>> {
    c.into_iter().map(|(i, t, m, s, sf)| {
        vec![i.to_string(), t.to_string(), m.to_string(), s.to_string(), sf.to_string()]
    })
}

fn summarize_estimator(kind: EstimatorKind, seeds: &[(u64, Vec<FoldSeries>)]) -> EstimatorSummary {
    let regimes: Vec<Vec<f64>> = seeds
        .iter()
        .map(|(_, folds)| folds.iter().map(|f| regime(&f.average)).collect())
        .collect();
    let all: Vec<f64> = regimes.iter().flatten().copied().collect();
    let seed_means: Vec<f64> = regimes.iter().map(|r| mean(r)).collect();
    let fold_spreads: Vec<f64> = regimes.iter().map(|r| std_dev(r)).collect();
    let mut per_joint = [0.0; N_DOF];
    for (j, pj) in per_joint.iter_mut().enumerate() {
        let vals: Vec<f64> = seeds
            .iter()
            .flat_map(|(_, folds)| folds.iter())
            .map(|f| regime(&f.per_joint.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        *pj = mean(&vals);
    }
    EstimatorSummary {
        kind,
        seeds: seeds.iter().map(|(s, _)| *s).collect(),
        regime_mean: mean(&all),
        regime_std: std_dev(&all),
        regime_std_seeds: std_dev(&seed_means),
        regime_std_folds: mean(&fold_spreads),
        regime_per_joint: per_joint,
        regimes,
    }
}

/// Reads every `<est>/seed_*/fold_*.csv` below `out` and writes
/// `metrics_<est>.csv`, `metrics_<est>_joint<j>.csv`, `plot_data.csv` and
/// `summary.csv`. Estimators without results are skipped with a warning.
pub fn summarize(out: &Path) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut plot_curves = Vec::new();
    for kind in EstimatorKind::ALL {
        let dir = out.join(kind.label());
        if !dir.is_dir() {
            log::warn!("no results for estimator `{}` in {}", kind.label(), out.display());
            continue;
        }
        let seeds = load_estimator(&dir)?;
        if seeds.is_empty() {
            log::warn!("estimator `{}` has no finished folds", kind.label());
            continue;
        }

        let avg = curve(&seeds, |f, i| f.average[i]);
        write_rows(
            &out.join(format!("metrics_{}.csv", kind.label())),
            &METRICS_HEADER,
            curve_rows(avg.clone()),
        )?;
        for j in 0..N_DOF {
            write_rows(
                &out.join(format!("metrics_{}_joint{}.csv", kind.label(), j + 1)),
                &METRICS_HEADER,
                curve_rows(curve(&seeds, |f, i| f.per_joint[i][j])),
            )?;
        }
        plot_curves.push((kind, avg));
        summary.estimators.push(summarize_estimator(kind, &seeds));
    }

    let summary_rows = summary.estimators.iter().map(|e| {
        vec![
            e.kind.label().to_string(),
            e.seeds.len().to_string(),
            e.n_series().to_string(),
            e.regime_mean.to_string(),
            e.regime_std.to_string(),
            e.regime_std_seeds.to_string(),
            e.regime_std_folds.to_string(),
            e.regime_per_joint[0].to_string(),
            e.regime_per_joint[1].to_string(),
        ]
    });
    write_rows(&out.join("summary.csv"), &SUMMARY_HEADER, summary_rows)?;

    let mut plot_header = vec!["sample_index".to_string(), "time_s".to_string()];
    for (kind, _) in &plot_curves {
        plot_header.push(format!("{}_mean", kind.label()));
        plot_header.push(format!("{}_std", kind.label()));
    }
    let len = plot_curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let plot_rows = (0..len).map(|i| {
        let mut row = vec![i.to_string()];
        let time = plot_curves
            .iter()
            .find_map(|(_, c)| c.get(i).map(|r| r.1))
            .unwrap_or(f64::NAN);
        row.push(time.to_string());
        for (_, c) in &plot_curves {
            match c.get(i) {
                Some(r) => {
                    row.push(r.2.to_string());
                    row.push(r.3.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        row
    });
    let header_refs: Vec<&str> = plot_header.iter().map(String::as_str).collect();
    write_rows(&out.join("plot_data.csv"), &header_refs, plot_rows)?;

    Ok(summary)
}
