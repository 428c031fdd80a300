//! Flat `key = value` experiment configuration (TOML syntax).
//!
//! Every key is optional; missing keys take the defaults below.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `link_lengths`, `link_masses`, `com_offsets`, `link_inertias` | see [`PlanarArmModel::default`] | plant body, two entries each |
//! | `gravity` | 9.81 | m/s² |
//! | `viscous`, `coulomb` | `[0, 0]` | friction per joint |
//! | `noise_std` | 0 | torque noise, N·m |
//! | `traj_a_joint1` … `traj_b_joint2` | built-in | lists of `[amplitude, frequency_hz, phase]` |
//! | `rate_hz` | 10 | sample rate |
//! | `n_train` | 10000 | length of dataset A |
//! | `n_test_folds`, `fold_size` | 10, 1000 | dataset B layout |
//! | `estimators` | `["p", "np", "sp"]` | subset of p, np, sp |
//! | `lambda_p`, `lambda_np` | 1e-6 · n_train | regularization |
//! | `sigma` | `"median"` | kernel bandwidth or `"median"` |
//! | `features` | 1000 | random feature dimension D |
//! | `np_input_mode` | `"x_and_yhat"` | or `"x_only"` |
//! | `residual_mode` | `"post"` | or `"pre"` |
//! | `seeds` | `[0]` | one run per seed |
//! | `rmse_window` | 30 | sliding window, samples |
//! | `checkpoint` | true | write a model checkpoint after every fold |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbd::{PlanarArmModel, SineTerm, TrajectorySpec, N_DOF};
use crate::semiparametric::{
    Bandwidth, CascadeConfig, EstimatorKind, NpInputMode, ResidualMode,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSetting {
    Value(f64),
    Keyword(String),
}

impl SigmaSetting {
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("median") {
            return Ok(SigmaSetting::Keyword("median".into()));
        }
        s.trim()
            .parse::<f64>()
            .map(SigmaSetting::Value)
            .map_err(|_| Error::Config(format!("sigma must be a number or `median`, got `{s}`")))
    }

    fn bandwidth(&self) -> Result<Bandwidth> {
        match self {
            SigmaSetting::Value(v) if *v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(*v)),
            SigmaSetting::Value(v) => Err(Error::Config(format!("sigma must be positive, got {v}"))),
            SigmaSetting::Keyword(k) if k.eq_ignore_ascii_case("median") => Ok(Bandwidth::Median),
            SigmaSetting::Keyword(k) => {
                Err(Error::Config(format!("sigma must be a number or `median`, got `{k}`")))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub link_lengths: [f64; N_DOF],
    pub link_masses: [f64; N_DOF],
    pub com_offsets: [f64; N_DOF],
    pub link_inertias: [f64; N_DOF],
    pub gravity: f64,
    pub viscous: [f64; N_DOF],
    pub coulomb: [f64; N_DOF],
    pub noise_std: f64,

    pub traj_a_joint1: Vec<[f64; 3]>,
    pub traj_a_joint2: Vec<[f64; 3]>,
    pub traj_b_joint1: Vec<[f64; 3]>,
    pub traj_b_joint2: Vec<[f64; 3]>,

    pub rate_hz: f64,
    pub n_train: usize,
    pub n_test_folds: usize,
    pub fold_size: usize,
    pub estimators: Vec<String>,
    pub lambda_p: Option<f64>,
    pub lambda_np: Option<f64>,
    pub sigma: SigmaSetting,
    pub features: usize,
    pub np_input_mode: String,
    pub residual_mode: String,
    pub seeds: Vec<u64>,
    pub rmse_window: usize,
    pub checkpoint: bool,
}

fn terms_to_rows(terms: &[SineTerm]) -> Vec<[f64; 3]> {
    terms.iter().map(|t| [t.amplitude, t.frequency, t.phase]).collect()
}

fn rows_to_terms(rows: &[[f64; 3]]) -> Vec<SineTerm> {
    rows.iter().map(|r| SineTerm::new(r[0], r[1], r[2])).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let plant = PlanarArmModel::default();
        let a = TrajectorySpec::dataset_a();
        let b = TrajectorySpec::dataset_b();
        Self {
            link_lengths: plant.link_lengths,
            link_masses: plant.link_masses,
            com_offsets: plant.com_offsets,
            link_inertias: plant.link_inertias,
            gravity: plant.gravity,
            viscous: plant.viscous,
            coulomb: plant.coulomb,
            noise_std: plant.noise_std,
            traj_a_joint1: terms_to_rows(&a.joints[0]),
            traj_a_joint2: terms_to_rows(&a.joints[1]),
            traj_b_joint1: terms_to_rows(&b.joints[0]),
            traj_b_joint2: terms_to_rows(&b.joints[1]),
            rate_hz: 10.0,
            n_train: 10_000,
            n_test_folds: 10,
            fold_size: 1000,
            estimators: vec!["p".into(), "np".into(), "sp".into()],
            lambda_p: None,
            lambda_np: None,
            sigma: SigmaSetting::Keyword("median".into()),
            features: 1000,
            np_input_mode: "x_and_yhat".into(),
            residual_mode: "post".into(),
            seeds: vec![0],
            rmse_window: 30,
            checkpoint: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn plant(&self) -> PlanarArmModel {
        PlanarArmModel {
            link_lengths: self.link_lengths,
            link_masses: self.link_masses,
            com_offsets: self.com_offsets,
            link_inertias: self.link_inertias,
            gravity: self.gravity,
            viscous: self.viscous,
            coulomb: self.coulomb,
            noise_std: self.noise_std,
        }
    }

    pub fn trajectory_a(&self) -> TrajectorySpec {
        TrajectorySpec {
            joints: [rows_to_terms(&self.traj_a_joint1), rows_to_terms(&self.traj_a_joint2)],
        }
    }

    pub fn trajectory_b(&self) -> TrajectorySpec {
        TrajectorySpec {
            joints: [rows_to_terms(&self.traj_b_joint1), rows_to_terms(&self.traj_b_joint2)],
        }
    }

    /// Length of dataset B.
    pub fn n_test(&self) -> usize {
        self.n_test_folds * self.fold_size
    }

    /// `1e-6 · n_train` unless set explicitly.
    pub fn lambda_p(&self) -> f64 {
        self.lambda_p.unwrap_or(1e-6 * self.n_train.max(1) as f64)
    }

    pub fn lambda_np(&self) -> f64 {
        self.lambda_np.unwrap_or(1e-6 * self.n_train.max(1) as f64)
    }

    pub fn estimator_kinds(&self) -> Result<Vec<EstimatorKind>> {
        let mut kinds = Vec::new();
        for label in &self.estimators {
            let k = EstimatorKind::from_label(label)
                .ok_or_else(|| Error::Config(format!("unknown estimator `{label}`")))?;
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        Ok(kinds)
    }

    pub fn cascade_config(&self, kind: EstimatorKind, seed: u64) -> Result<CascadeConfig> {
        let np_input_mode = match self.np_input_mode.as_str() {
            "x_and_yhat" => NpInputMode::XAndYhat,
            "x_only" => NpInputMode::XOnly,
            other => return Err(Error::Config(format!("unknown np_input_mode `{other}`"))),
        };
        let residual_mode = match self.residual_mode.as_str() {
            "post" => ResidualMode::PostUpdate,
            "pre" => ResidualMode::PreUpdate,
            other => return Err(Error::Config(format!("unknown residual_mode `{other}`"))),
        };
        Ok(CascadeConfig {
            kind,
            lambda_p: self.lambda_p(),
            lambda_np: self.lambda_np(),
            features: self.features,
            sigma: self.sigma.bandwidth()?,
            np_input_mode,
            residual_mode,
            seed,
            ablate_regressor: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.plant().validate().map_err(cfg_err)?;
        self.trajectory_a().validate().map_err(cfg_err)?;
        self.trajectory_b().validate().map_err(cfg_err)?;
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(Error::Config(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        if self.n_train < 2 {
            return Err(Error::Config("n_train must be at least 2".into()));
        }
        if self.n_test_folds == 0 || self.fold_size == 0 {
            return Err(Error::Config("n_test_folds and fold_size must be positive".into()));
        }
        if self.features == 0 || self.features % 2 != 0 {
            return Err(Error::Config(format!(
                "features must be a positive even number, got {}",
                self.features
            )));
        }
        if self.rmse_window == 0 {
            return Err(Error::Config("rmse_window must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        for (name, l) in [("lambda_p", self.lambda_p()), ("lambda_np", self.lambda_np())] {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {l}")));
            }
        }
        if self.estimator_kinds()?.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        self.sigma.bandwidth()?;
        self.cascade_config(EstimatorKind::Semiparametric, 0)?;
        Ok(())
    }
}
