//! Prioritized parametric → nonparametric cascade.
//!
//! The parametric stage identifies the base parameters `π̂` from the rigid
//! regressor and predicts `ŷ = Φ(x)·π̂`. The nonparametric stage maps the
//! normalized input (optionally extended with `ŷ`) through random Fourier
//! features and learns the residual `Δy = y − ŷ`. The prediction is
//! `ỹ = ŷ + Δỹ`.
//!
//! Within one update the parametric stage always goes first, and the
//! nonparametric stage only ever reads from it.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::rbd::{self, JointState, INPUT_DIM, N_DOF, N_PARAMS};
use crate::rff::{median_heuristic, Normalizer, RffMap};
use crate::rrls::RrlsState;

/// Rows used when estimating the kernel bandwidth from training inputs.
const MEDIAN_HEURISTIC_POINTS: usize = 1000;

/// Which estimator a model represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Rigid-body regressor only.
    Parametric,
    /// Random-feature RLS on the raw `(q, q̇, q̈)` input.
    Nonparametric,
    /// The cascade.
    Semiparametric,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Parametric,
        EstimatorKind::Nonparametric,
        EstimatorKind::Semiparametric,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Parametric => "p",
            EstimatorKind::Nonparametric => "np",
            EstimatorKind::Semiparametric => "sp",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p" => Some(EstimatorKind::Parametric),
            "np" => Some(EstimatorKind::Nonparametric),
            "sp" => Some(EstimatorKind::Semiparametric),
            _ => None,
        }
    }

    fn has_parametric(self) -> bool {
        self != EstimatorKind::Nonparametric
    }

    fn has_nonparametric(self) -> bool {
        self != EstimatorKind::Parametric
    }
}

/// Input of the nonparametric stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NpInputMode {
    XOnly,
    XAndYhat,
}

/// Which parametric estimate forms the residual target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualMode {
    /// `π̂` after incorporating the current sample.
    PostUpdate,
    /// `π̂` as it was when the sample arrived.
    PreUpdate,
}

/// Kernel bandwidth choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance of the normalized training inputs.
    Median,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub kind: EstimatorKind,
    pub lambda_p: f64,
    pub lambda_np: f64,
    pub features: usize,
    pub sigma: Bandwidth,
    pub np_input_mode: NpInputMode,
    pub residual_mode: ResidualMode,
    /// Seed for the random frequencies.
    pub seed: u64,
    /// Forces `Φ = 0`, turning the cascade into a nonparametric estimator.
    #[serde(default)]
    pub ablate_regressor: bool,
}

impl CascadeConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            lambda_p: 1e-2,
            lambda_np: 1e-2,
            features: 1000,
            sigma: Bandwidth::Median,
            np_input_mode: NpInputMode::XAndYhat,
            residual_mode: ResidualMode::PostUpdate,
            seed: 0,
            ablate_regressor: false,
        }
    }

    /// Input mode actually used: the pure nonparametric estimator has no
    /// `ŷ` to append.
    pub fn effective_input_mode(&self) -> NpInputMode {
        match self.kind {
            EstimatorKind::Nonparametric => NpInputMode::XOnly,
            _ => self.np_input_mode,
        }
    }

    pub fn np_input_dim(&self) -> usize {
        match self.effective_input_mode() {
            NpInputMode::XOnly => INPUT_DIM,
            NpInputMode::XAndYhat => INPUT_DIM + N_DOF,
        }
    }
}

/// Output of [`SemiparametricModel::predict`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    /// `ỹ = ŷ + Δỹ`.
    pub y_tilde: [f64; N_DOF],
    /// Parametric part `ŷ`.
    pub y_hat: [f64; N_DOF],
    /// Nonparametric residual estimate `Δỹ`.
    pub dy_tilde: [f64; N_DOF],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonparametricStage {
    map: RffMap,
    normalizer: Normalizer,
    state: RrlsState,
    mode: NpInputMode,
}

impl NonparametricStage {
    pub fn map(&self) -> &RffMap {
        &self.map
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn state(&self) -> &RrlsState {
        &self.state
    }

    fn features(&self, state: &JointState, y_hat: &[f64; N_DOF]) -> Result<Vec<f64>> {
        let mut xi: Vec<f64> = state.flatten().to_vec();
        if self.mode == NpInputMode::XAndYhat {
            xi.extend_from_slice(y_hat);
        }
        let xi = self.normalizer.normalize(&xi)?;
        self.map.apply(&xi)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemiparametricModel {
    config: CascadeConfig,
    parametric: Option<RrlsState>,
    nonparametric: Option<NonparametricStage>,
}

impl SemiparametricModel {
    /// Builds a zero-initialized estimator.
    ///
    /// `training` is used only to freeze the input normalizer and, with
    /// [`Bandwidth::Median`], the kernel bandwidth; nothing is learned from
    /// it here. Measured outputs stand in for `ŷ` when the nonparametric
    /// input includes it. A purely parametric estimator ignores it.
    pub fn new(config: CascadeConfig, training: &[(JointState, [f64; N_DOF])]) -> Result<Self> {
        let parametric = if config.kind.has_parametric() {
            Some(RrlsState::new(N_PARAMS, 1, config.lambda_p)?)
        } else {
            None
        };
        let nonparametric = if config.kind.has_nonparametric() {
            let mode = config.effective_input_mode();
            let d = config.np_input_dim();
            let rows = DMatrix::from_fn(training.len(), d, |i, j| {
                let (s, y) = &training[i];
                if j < INPUT_DIM {
                    s.flatten()[j]
                } else {
                    y[j - INPUT_DIM]
                }
            });
            let normalizer = Normalizer::fit(&rows)?;
            let sigma = match config.sigma {
                Bandwidth::Fixed(s) => s,
                Bandwidth::Median => {
                    let normalized = DMatrix::from_fn(rows.nrows(), d, |i, j| {
                        (rows[(i, j)] - normalizer.mean()[j]) / normalizer.scale()[j]
                    });
                    median_heuristic(&normalized, MEDIAN_HEURISTIC_POINTS)?
                }
            };
            let map = RffMap::sample(d, config.features, sigma, config.seed)?;
            let state = RrlsState::new(config.features, N_DOF, config.lambda_np)?;
            Some(NonparametricStage {
                map,
                normalizer,
                state,
                mode,
            })
        } else {
            None
        };
        Ok(Self {
            config,
            parametric,
            nonparametric,
        })
    }

    /// Builds from explicit parts, e.g. a map shared across estimators.
    pub fn from_parts(config: CascadeConfig, map: RffMap, normalizer: Normalizer) -> Result<Self> {
        let parametric = if config.kind.has_parametric() {
            Some(RrlsState::new(N_PARAMS, 1, config.lambda_p)?)
        } else {
            None
        };
        let nonparametric = if config.kind.has_nonparametric() {
            let d = config.np_input_dim();
            crate::error::check_len("feature map input", d, map.input_dim())?;
            crate::error::check_len("normalizer", d, normalizer.dim())?;
            let state = RrlsState::new(map.feature_dim(), N_DOF, config.lambda_np)?;
            Some(NonparametricStage {
                map,
                normalizer,
                state,
                mode: config.effective_input_mode(),
            })
        } else {
            None
        };
        Ok(Self {
            config,
            parametric,
            nonparametric,
        })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn kind(&self) -> EstimatorKind {
        self.config.kind
    }

    pub fn parametric(&self) -> Option<&RrlsState> {
        self.parametric.as_ref()
    }

    pub fn nonparametric(&self) -> Option<&NonparametricStage> {
        self.nonparametric.as_ref()
    }

    fn parametric_prediction(&self, phi: &[[f64; N_PARAMS]; N_DOF]) -> Result<[f64; N_DOF]> {
        let mut y_hat = [0.0; N_DOF];
        if let Some(p) = &self.parametric {
            for (yh, row) in y_hat.iter_mut().zip(phi) {
                *yh = p.predict(row)?[0];
            }
        }
        Ok(y_hat)
    }

    fn regressor_rows(&self, state: &JointState) -> [[f64; N_PARAMS]; N_DOF] {
        if self.config.ablate_regressor {
            [[0.0; N_PARAMS]; N_DOF]
        } else {
            rbd::regressor_rows(state)
        }
    }

    pub fn predict(&self, state: &JointState) -> Result<Prediction> {
        if !state.is_finite() {
            return Err(Error::NonFinite("joint state"));
        }
        let phi = self.regressor_rows(state);
        let y_hat = self.parametric_prediction(&phi)?;
        let mut dy_tilde = [0.0; N_DOF];
        if let Some(np) = &self.nonparametric {
            let feats = np.features(state, &y_hat)?;
            dy_tilde.copy_from_slice(&np.state.predict(&feats)?);
        }
        let mut y_tilde = [0.0; N_DOF];
        for j in 0..N_DOF {
            y_tilde[j] = y_hat[j] + dy_tilde[j];
        }
        Ok(Prediction {
            y_tilde,
            y_hat,
            dy_tilde,
        })
    }

    /// Parametric update first, then the nonparametric stage on the
    /// residual. Rejected inputs leave the model untouched.
    pub fn update(&mut self, state: &JointState, y: &[f64; N_DOF]) -> Result<()> {
        if !state.is_finite() {
            return Err(Error::NonFinite("joint state"));
        }
        check_finite("measured output", y)?;

        let phi = self.regressor_rows(state);
        let y_hat = match self.config.residual_mode {
            ResidualMode::PreUpdate => Some(self.parametric_prediction(&phi)?),
            ResidualMode::PostUpdate => None,
        };

        if let Some(p) = &mut self.parametric {
            let rows = DMatrix::from_fn(N_DOF, N_PARAMS, |i, j| phi[i][j]);
            p.update_block(&rows, y)?;
            p.solve();
        }
        let y_hat = match y_hat {
            Some(v) => v,
            None => self.parametric_prediction(&phi)?,
        };

        if let Some(np) = &mut self.nonparametric {
            let mut residual = [0.0; N_DOF];
            for j in 0..N_DOF {
                residual[j] = y[j] - y_hat[j];
            }
            let feats = np.features(state, &y_hat)?;
            np.state.update(&feats, &residual)?;
        }
        Ok(())
    }

    /// Current `π̂`; zero for an estimator without a parametric stage.
    pub fn inertial_estimate(&mut self) -> [f64; N_PARAMS] {
        let mut out = [0.0; N_PARAMS];
        if let Some(p) = &mut self.parametric {
            out.copy_from_slice(p.solve().as_slice());
        }
        out
    }

    /// Refreshes any stale weights so later predictions use the cache.
    pub fn refresh(&mut self) {
        if let Some(p) = &mut self.parametric {
            p.solve();
        }
        if let Some(np) = &mut self.nonparametric {
            np.state.solve();
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::io(path, e.into()))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::parse(path, e))
    }
}
