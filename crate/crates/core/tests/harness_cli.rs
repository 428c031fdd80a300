use std::path::Path;
use std::process::Command;

use semiparam_dyn::harness::dataset::{read_csv, simulate, Sample};
use semiparam_dyn::harness::metrics::{joint_average, window_rmse};
use semiparam_dyn::harness::protocol::{fold_path, run_dir, test_then_update, train};
use semiparam_dyn::harness::summary::{read_fold, METRICS_HEADER, SUMMARY_HEADER};
use semiparam_dyn::harness::{run_protocol, summarize, ExperimentConfig};
use semiparam_dyn::rbd::{base_params, rigid_torques, PlanarArmModel, TrajectorySpec};
use semiparam_dyn::semiparametric::{CascadeConfig, EstimatorKind, SemiparametricModel};

const SMALL: &str = r#"
coulomb = [0.3, 0.3]
viscous = [0.2, 0.2]
noise_std = 0.01
n_train = 400
n_test_folds = 3
fold_size = 100
features = 60
seeds = [0, 1]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_semiparam"));
    c.env("RUST_LOG", "warn");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn gen_is_byte_identical_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for out in ["one", "two"] {
        let status = bin()
            .args(["gen", "--seed", "7", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["dataset_a.csv", "dataset_b.csv"] {
        let a = std::fs::read(dir.path().join("one").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("two").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let other = dir.path().join("three");
    assert!(bin()
        .args(["gen", "--seed", "8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&other)
        .status()
        .unwrap()
        .success());
    assert_ne!(
        std::fs::read(dir.path().join("one/dataset_b.csv")).unwrap(),
        std::fs::read(other.join("dataset_b.csv")).unwrap()
    );
}

#[test]
fn noise_free_outputs_equal_the_regressor_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["gen", "--which", "a", "--seed", "0", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let data = read_csv(&dir.path().join("dataset_a.csv")).unwrap();
    assert_eq!(data.len(), 10_000);
    assert_eq!(data[0].t, 0.0);
    assert!((data[9999].t - 999.9).abs() < 1e-9);
    for w in data.windows(2) {
        assert!((w[1].t - w[0].t - 0.1).abs() < 1e-9);
    }
    let pi = base_params(&PlanarArmModel::default());
    for s in &data {
        let y = rigid_torques(&s.state, pi.as_slice());
        for j in 0..2 {
            assert!((s.y[j] - y[j]).abs() <= 1e-10, "{} vs {}", s.y[j], y[j]);
        }
    }
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(dir.path(), "n_train = 10\nbogus = 1\n");
    let out = bin()
        .args(["run", "--config"])
        .arg(&bad_key)
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let code = |args: &[&str]| {
        bin()
            .args(args)
            .arg("--out")
            .arg(dir.path().join("r"))
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(code(&["run", "--sigma", "wide"]), Some(2));
    assert_eq!(code(&["run", "--estimators", "p,gp"]), Some(2));
    assert_eq!(code(&["run", "--lambda-p=-1"]), Some(2));
    assert_eq!(code(&["gen", "--which", "c"]), Some(2));
    assert_eq!(code(&["run", "--no-such-flag"]), Some(2));
}

#[test]
fn io_errors_exit_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain_file");
    std::fs::write(&file, "x").unwrap();
    let out = bin()
        .args(["gen", "--out"])
        .arg(file.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("plain_file"));

    let missing = bin()
        .args(["gen", "--config"])
        .arg(dir.path().join("missing.toml"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(3));
}

#[test]
fn run_and_summarize_write_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    for est in ["p", "np", "sp"] {
        for seed in [0, 1] {
            for fold in 0..3 {
                assert!(out.join(est).join(format!("seed_{seed}")).join(format!("fold_{fold:02}.csv")).exists());
            }
        }
        let (header, rows) = read_table(&out.join(format!("metrics_{est}.csv")));
        assert_eq!(header, METRICS_HEADER);
        assert_eq!(rows.len(), 100);
        assert_eq!(rows[10][0], "10");
        assert_eq!(rows[10][1], "1");
    }
    let (header, rows) = read_table(&out.join("summary.csv"));
    assert_eq!(header, SUMMARY_HEADER);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["p", "np", "sp"]);
    assert!(rows.iter().all(|r| r[1] == "2" && r[2] == "6"));

    let first = std::fs::read(out.join("summary.csv")).unwrap();
    let again = bin().args(["summarize", "--out"]).arg(&out).status().unwrap();
    assert!(again.success());
    assert_eq!(first, std::fs::read(out.join("summary.csv")).unwrap());
}

#[test]
fn summarizing_an_empty_directory_gives_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let summary = summarize(dir.path()).unwrap();
    assert!(summary.estimators.is_empty());
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.trim_end(), SUMMARY_HEADER.join(","));
}

#[test]
fn single_seed_has_zero_spread_across_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    cfg.seeds = vec![3];
    cfg.estimators = vec!["sp".into()];
    let summary = run_protocol(&cfg, dir.path()).unwrap();
    assert_eq!(summary.estimators[0].regime_std_seeds, 0.0);
    let (_, rows) = read_table(&dir.path().join("metrics_sp.csv"));
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0));
    assert!(rows.iter().skip(1).any(|r| r[4].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn runs_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    cfg.seeds = vec![5];
    cfg.checkpoint = false;
    run_protocol(&cfg, &dir.path().join("a")).unwrap();
    run_protocol(&cfg, &dir.path().join("b")).unwrap();
    for kind in EstimatorKind::ALL {
        for fold in 0..3 {
            let a = std::fs::read(fold_path(&run_dir(&dir.path().join("a"), kind, 5), fold)).unwrap();
            let b = std::fs::read(fold_path(&run_dir(&dir.path().join("b"), kind, 5), fold)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn an_interrupted_run_resumes_from_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut full = ExperimentConfig::from_toml_str(SMALL).unwrap();
    full.seeds = vec![2];
    run_protocol(&full, &dir.path().join("full")).unwrap();

    // A run that stopped after the first fold: same data prefix and model.
    let partial_dir = dir.path().join("partial");
    let mut partial = full.clone();
    partial.n_test_folds = 1;
    run_protocol(&partial, &partial_dir).unwrap();
    std::fs::write(partial_dir.join("config.toml"), full.to_toml_string()).unwrap();
    run_protocol(&full, &partial_dir).unwrap();

    for kind in EstimatorKind::ALL {
        for fold in 0..3 {
            let a = std::fs::read(fold_path(&run_dir(&dir.path().join("full"), kind, 2), fold)).unwrap();
            let b = std::fs::read(fold_path(&run_dir(&partial_dir, kind, 2), fold)).unwrap();
            assert_eq!(a, b, "{} fold {fold}", kind.label());
        }
    }

    let mut other = full.clone();
    other.features = 61;
    assert!(run_protocol(&other, &partial_dir).is_err());
}

#[test]
fn fold_files_round_trip_the_window_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    cfg.seeds = vec![0];
    cfg.estimators = vec!["np".into()];
    cfg.rmse_window = 7;
    run_protocol(&cfg, dir.path()).unwrap();
    let path = fold_path(&run_dir(dir.path(), EstimatorKind::Nonparametric, 0), 1);
    let series = read_fold(&path).unwrap();
    let (_, rows) = read_table(&path);
    let errors: Vec<[f64; 2]> = rows
        .iter()
        .map(|r| [r[2].parse().unwrap(), r[3].parse().unwrap()])
        .collect();
    let rmse = window_rmse(&errors, 7);
    for i in 0..errors.len() {
        assert_eq!(series.per_joint[i], rmse[i]);
        assert_eq!(series.average[i], joint_average(&rmse[i]));
        // Direct trailing-window definition.
        let lo = i.saturating_sub(6);
        let n = (i + 1 - lo) as f64;
        for j in 0..2 {
            let direct = (errors[lo..=i].iter().map(|e| e[j] * e[j]).sum::<f64>() / n).sqrt();
            assert!((direct - rmse[i][j]).abs() <= 1e-12 * (1.0 + direct));
        }
    }
}

fn stream() -> Vec<Sample> {
    let plant = PlanarArmModel {
        coulomb: [0.3; 2],
        noise_std: 0.01,
        ..PlanarArmModel::default()
    };
    simulate(&plant, &TrajectorySpec::dataset_b(), 10.0, 300, 1).unwrap()
}

#[test]
fn each_prediction_precedes_its_own_update() {
    let data = stream();
    let training: Vec<_> = data.iter().map(|s| (s.state, s.y)).collect();
    let cfg = CascadeConfig {
        features: 80,
        ..CascadeConfig::new(EstimatorKind::Semiparametric)
    };
    let base = SemiparametricModel::new(cfg, &training).unwrap();
    let mut warm = base.clone();
    train(&mut warm, &data[..100]).unwrap();

    let test = &data[100..];
    let reference = test_then_update(&mut warm.clone(), test).unwrap();
    let sentinel = 57;
    let shift = 1e3;
    let mut poisoned = test.to_vec();
    poisoned[sentinel].y[0] += shift;
    let errors = test_then_update(&mut warm.clone(), &poisoned).unwrap();
    assert_eq!(errors[..sentinel], reference[..sentinel]);
    assert!((errors[sentinel][0] - reference[sentinel][0] - shift).abs() <= 1e-9);
    assert_eq!(errors[sentinel][1], reference[sentinel][1]);
    assert_ne!(errors[sentinel + 1], reference[sentinel + 1]);
}
