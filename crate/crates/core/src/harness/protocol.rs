//! The sequential validation protocol.
//!
//! For every `(estimator, seed)` pair: start from a zero model, train on all
//! of dataset A, then walk the folds of dataset B one sample at a time,
//! predicting each sample before it is used for the update. Models carry
//! over from one fold to the next.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.toml
//! data/seed_<s>/dataset_a.csv, dataset_b.csv
//! <est>/seed_<s>/fold_<kk>.csv      per-sample errors and window RMSE
//! <est>/seed_<s>/rff_map.txt        frozen random features (np, sp)
//! <est>/seed_<s>/checkpoint.json    model after the last finished fold
//! <est>/seed_<s>/progress.json
//! metrics_<est>.csv, summary.csv    written by `summarize`
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbd::N_DOF;
use crate::semiparametric::{EstimatorKind, SemiparametricModel};

use super::config::ExperimentConfig;
use super::dataset::{self, Sample, Which};
use super::metrics;
use super::summary::{summarize, Summary};

pub const FOLD_HEADER: [&str; 7] = [
    "sample_index",
    "time_s",
    "err1",
    "err2",
    "rmse_window1",
    "rmse_window2",
    "rmse_window",
];

/// Incorporates every sample without recording predictions.
pub fn train(model: &mut SemiparametricModel, data: &[Sample]) -> Result<()> {
    for s in data {
        model.update(&s.state, &s.y)?;
    }
    Ok(())
}

/// Predict-then-update over `data`; returns `y − ỹ` per sample, where each
/// prediction precedes the update with that sample.
pub fn test_then_update(model: &mut SemiparametricModel, data: &[Sample]) -> Result<Vec<[f64; N_DOF]>> {
    let mut errors = Vec::with_capacity(data.len());
    for s in data {
        let p = model.predict(&s.state)?;
        let mut e = [0.0; N_DOF];
        for j in 0..N_DOF {
            e[j] = s.y[j] - p.y_tilde[j];
        }
        errors.push(e);
        model.update(&s.state, &s.y)?;
    }
    Ok(errors)
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Progress {
    trained: bool,
    folds_done: usize,
}

pub fn run_dir(out: &Path, kind: EstimatorKind, seed: u64) -> PathBuf {
    out.join(kind.label()).join(format!("seed_{seed}"))
}

pub fn fold_path(dir: &Path, fold: usize) -> PathBuf {
    dir.join(format!("fold_{fold:02}.csv"))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_fold(path: &Path, errors: &[[f64; N_DOF]], rate_hz: f64, window: usize) -> Result<()> {
    let rmse = metrics::window_rmse(errors, window);
    let mut w = csv::Writer::from_path(path).map_err(|e| dataset::csv_io(path, e))?;
    w.write_record(FOLD_HEADER).map_err(|e| dataset::csv_io(path, e))?;
    for (i, (e, r)) in errors.iter().zip(&rmse).enumerate() {
        w.write_record([
            i.to_string(),
            (i as f64 / rate_hz).to_string(),
            e[0].to_string(),
            e[1].to_string(),
            r[0].to_string(),
            r[1].to_string(),
            metrics::joint_average(r).to_string(),
        ])
        .map_err(|e| dataset::csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes both datasets for `seed` into `dir` and returns them.
pub fn write_datasets(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<(Vec<Sample>, Vec<Sample>)> {
    create_dir(dir)?;
    let a = dataset::generate_dataset(config, Which::A, seed)?;
    let b = dataset::generate_dataset(config, Which::B, seed)?;
    dataset::write_csv(&dir.join(Which::A.file_name()), &a)?;
    dataset::write_csv(&dir.join(Which::B.file_name()), &b)?;
    Ok((a, b))
}

fn training_pairs(data: &[Sample]) -> Vec<(crate::rbd::JointState, [f64; N_DOF])> {
    data.iter().map(|s| (s.state, s.y)).collect()
}

/// Runs or resumes one `(estimator, seed)` pair.
fn run_one(
    config: &ExperimentConfig,
    kind: EstimatorKind,
    seed: u64,
    train_set: &[Sample],
    test_set: &[Sample],
    dir: &Path,
) -> Result<()> {
    create_dir(dir)?;
    let progress_path = dir.join("progress.json");
    let checkpoint_path = dir.join("checkpoint.json");

    let progress: Progress = match std::fs::read_to_string(&progress_path) {
        Ok(text) if config.checkpoint && checkpoint_path.exists() => {
            serde_json::from_str(&text).map_err(|e| Error::parse(&progress_path, e))?
        }
        _ => Progress::default(),
    };
    if progress.folds_done >= config.n_test_folds {
        log::info!("{} seed {seed}: already complete", kind.label());
        return Ok(());
    }

    let mut model = if progress.trained {
        log::info!(
            "{} seed {seed}: resuming after fold {}",
            kind.label(),
            progress.folds_done
        );
        SemiparametricModel::load(&checkpoint_path)?
    } else {
        let cascade = config.cascade_config(kind, seed)?;
        let mut model = SemiparametricModel::new(cascade, &training_pairs(train_set))?;
        if let Some(np) = model.nonparametric() {
            np.map().write_text(&dir.join("rff_map.txt"))?;
        }
        train(&mut model, train_set)?;
        if config.checkpoint {
            model.save(&checkpoint_path)?;
            write_json(&progress_path, &Progress { trained: true, folds_done: 0 })?;
        }
        model
    };

    for fold in progress.folds_done..config.n_test_folds {
        let part = &test_set[fold * config.fold_size..(fold + 1) * config.fold_size];
        let errors = test_then_update(&mut model, part)?;
        write_fold(&fold_path(dir, fold), &errors, config.rate_hz, config.rmse_window)?;
        if config.checkpoint {
            model.save(&checkpoint_path)?;
            write_json(
                &progress_path,
                &Progress {
                    trained: true,
                    folds_done: fold + 1,
                },
            )?;
        }
        log::debug!("{} seed {seed}: fold {fold} done", kind.label());
    }
    Ok(())
}

/// Full protocol for every configured seed and estimator, followed by
/// [`summarize`].
pub fn run_protocol(config: &ExperimentConfig, out: &Path) -> Result<Summary> {
    config.validate()?;
    create_dir(out)?;
    let config_path = out.join("config.toml");
    let text = config.to_toml_string();
    match std::fs::read_to_string(&config_path) {
        Ok(existing) if existing != text => {
            return Err(Error::Config(format!(
                "{} holds results for a different configuration",
                out.display()
            )));
        }
        Ok(_) => {}
        Err(_) => std::fs::write(&config_path, &text).map_err(|e| Error::io(&config_path, e))?,
    }

    let kinds = config.estimator_kinds()?;
    for &seed in &config.seeds {
        let (train_set, test_set) =
            write_datasets(config, seed, &out.join("data").join(format!("seed_{seed}")))?;
        for &kind in &kinds {
            log::info!("running {} seed {seed}", kind.label());
            run_one(config, kind, seed, &train_set, &test_set, &run_dir(out, kind, seed))?;
        }
    }
    summarize(out)
}
