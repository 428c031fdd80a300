//! Planar two-link revolute arm: the simulated plant.
//!
//! Joint angles are measured from the horizontal (joint 1) and relative to
//! link 1 (joint 2); gravity acts along −y. The rigid inverse dynamics are
//! linear in five base parameters
//!
//! ```text
//! a1 = m1·lc1² + I1 + m2·l1²     g1 = (m1·lc1 + m2·l1)·g
//! a2 = m2·lc2² + I2              g2 = m2·lc2·g
//! a3 = m2·l1·lc2
//! ```
//!
//! and the plant adds viscous and Coulomb friction plus Gaussian sensor
//! noise on top of the rigid torques.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_DOF: usize = 2;
pub const N_PARAMS: usize = 5;
/// Length of the flattened `(q, q̇, q̈)` input.
pub const INPUT_DIM: usize = 3 * N_DOF;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: [f64; N_DOF],
    pub qd: [f64; N_DOF],
    pub qdd: [f64; N_DOF],
}

impl JointState {
    pub fn new(q: [f64; N_DOF], qd: [f64; N_DOF], qdd: [f64; N_DOF]) -> Self {
        Self { q, qd, qdd }
    }

    /// `[q1, q2, qd1, qd2, qdd1, qdd2]`.
    pub fn flatten(&self) -> [f64; INPUT_DIM] {
        [
            self.q[0], self.q[1], self.qd[0], self.qd[1], self.qdd[0], self.qdd[1],
        ]
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        crate::error::check_len("joint state", INPUT_DIM, x.len())?;
        Ok(Self::new([x[0], x[1]], [x[2], x[3]], [x[4], x[5]]))
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanarArmModel {
    pub link_lengths: [f64; N_DOF],
    pub link_masses: [f64; N_DOF],
    pub com_offsets: [f64; N_DOF],
    pub link_inertias: [f64; N_DOF],
    pub gravity: f64,
    pub viscous: [f64; N_DOF],
    pub coulomb: [f64; N_DOF],
    pub noise_std: f64,
}

impl Default for PlanarArmModel {
    fn default() -> Self {
        Self {
            link_lengths: [0.30, 0.25],
            link_masses: [1.5, 1.0],
            com_offsets: [0.15, 0.12],
            link_inertias: [0.012, 0.006],
            gravity: 9.81,
            viscous: [0.0; N_DOF],
            coulomb: [0.0; N_DOF],
            noise_std: 0.0,
        }
    }
}

impl PlanarArmModel {
    /// Every mass, length, offset and inertia set to one, rigid and noise-free.
    pub fn unit() -> Self {
        Self {
            link_lengths: [1.0; N_DOF],
            link_masses: [1.0; N_DOF],
            com_offsets: [1.0; N_DOF],
            link_inertias: [1.0; N_DOF],
            gravity: 9.81,
            viscous: [0.0; N_DOF],
            coulomb: [0.0; N_DOF],
            noise_std: 0.0,
        }
    }

    /// Same body without friction or noise.
    pub fn rigid(&self) -> Self {
        Self {
            viscous: [0.0; N_DOF],
            coulomb: [0.0; N_DOF],
            noise_std: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .link_lengths
            .iter()
            .chain(&self.link_masses)
            .chain(&self.com_offsets)
            .chain(&self.link_inertias)
            .chain(&self.viscous)
            .chain(&self.coulomb)
            .chain([&self.gravity, &self.noise_std]);
        if !all.clone().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("plant model"));
        }
        let bad = |what: &str| Err(Error::InvalidArgument(format!("plant model: {what}")));
        if self.link_masses.iter().any(|&m| m <= 0.0) {
            return bad("masses must be positive");
        }
        if self.link_lengths.iter().any(|&l| l <= 0.0) {
            return bad("link lengths must be positive");
        }
        if self
            .link_inertias
            .iter()
            .chain(&self.viscous)
            .chain(&self.coulomb)
            .any(|&v| v < 0.0)
            || self.noise_std < 0.0
        {
            return bad("inertias, friction and noise must be non-negative");
        }
        Ok(())
    }
}

/// Identifiable parameter vector `(a1, a2, a3, g1, g2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseParams(pub [f64; N_PARAMS]);

impl BaseParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn base_params(model: &PlanarArmModel) -> BaseParams {
    let [l1, _] = model.link_lengths;
    let [m1, m2] = model.link_masses;
    let [lc1, lc2] = model.com_offsets;
    let [i1, i2] = model.link_inertias;
    let g = model.gravity;
    BaseParams([
        m1 * lc1 * lc1 + i1 + m2 * l1 * l1,
        m2 * lc2 * lc2 + i2,
        m2 * l1 * lc2,
        (m1 * lc1 + m2 * l1) * g,
        m2 * lc2 * g,
    ])
}

/// Regressor rows; `Φ(x)·π` gives the rigid joint torques.
pub fn regressor_rows(state: &JointState) -> [[f64; N_PARAMS]; N_DOF] {
    let [q1, q2] = state.q;
    let [qd1, qd2] = state.qd;
    let [qdd1, qdd2] = state.qdd;
    let (s2, c2) = q2.sin_cos();
    let c1 = q1.cos();
    let c12 = (q1 + q2).cos();
    [
        [
            qdd1,
            qdd1 + qdd2,
            c2 * (2.0 * qdd1 + qdd2) - s2 * (qd2 * qd2 + 2.0 * qd1 * qd2),
            c1,
            c12,
        ],
        [0.0, qdd1 + qdd2, c2 * qdd1 + s2 * qd1 * qd1, 0.0, c12],
    ]
}

/// `Φ(x)` as a `2 × 5` matrix.
pub fn regressor(state: &JointState) -> DMatrix<f64> {
    let rows = regressor_rows(state);
    DMatrix::from_fn(N_DOF, N_PARAMS, |i, j| rows[i][j])
}

/// `Φ(x)·π`.
pub fn rigid_torques(state: &JointState, params: &[f64]) -> [f64; N_DOF] {
    let rows = regressor_rows(state);
    let mut y = [0.0; N_DOF];
    for (yi, row) in y.iter_mut().zip(&rows) {
        *yi = row.iter().zip(params).map(|(a, b)| a * b).sum();
    }
    y
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Measured joint torques: rigid dynamics, friction and sensor noise.
pub fn simulate_output<R: Rng + ?Sized>(
    model: &PlanarArmModel,
    state: &JointState,
    rng: &mut R,
) -> [f64; N_DOF] {
    let pi = base_params(model);
    let mut y = rigid_torques(state, pi.as_slice());
    for j in 0..N_DOF {
        y[j] += model.viscous[j] * state.qd[j] + model.coulomb[j] * sign(state.qd[j]);
    }
    if model.noise_std > 0.0 {
        let noise = Normal::new(0.0, model.noise_std).expect("validated noise level");
        for yj in &mut y {
            *yj += noise.sample(rng);
        }
    }
    y
}

/// One `(Φ(x), y)` observation with its raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressorSample {
    pub phi: DMatrix<f64>,
    pub y: [f64; N_DOF],
    pub x_raw: [f64; INPUT_DIM],
}

impl RegressorSample {
    pub fn new(state: &JointState, y: [f64; N_DOF]) -> Self {
        Self {
            phi: regressor(state),
            y,
            x_raw: state.flatten(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Radians.
    pub phase: f64,
}

impl SineTerm {
    pub const fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
        }
    }
}

/// Sum-of-sines reference per joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub joints: [Vec<SineTerm>; N_DOF],
}

impl TrajectorySpec {
    /// Training motion.
    pub fn dataset_a() -> Self {
        Self {
            joints: [
                vec![SineTerm::new(0.9, 0.050, 0.0), SineTerm::new(0.35, 0.131, 0.4)],
                vec![SineTerm::new(1.1, 0.073, 1.0), SineTerm::new(0.40, 0.177, 0.0)],
            ],
        }
    }

    /// Test motion; frequencies and phases disjoint from [`dataset_a`].
    ///
    /// [`dataset_a`]: TrajectorySpec::dataset_a
    pub fn dataset_b() -> Self {
        Self {
            joints: [
                vec![SineTerm::new(0.7, 0.061, 2.1), SineTerm::new(0.45, 0.113, 0.7)],
                vec![SineTerm::new(1.3, 0.083, 0.3), SineTerm::new(0.30, 0.193, 1.9)],
            ],
        }
    }

    /// Faster, richer motion for parameter identification: the inertia
    /// terms need larger accelerations than the protocol datasets provide.
    pub fn excitation() -> Self {
        Self {
            joints: [
                vec![SineTerm::new(0.8, 0.17, 0.0), SineTerm::new(0.5, 0.37, 1.3)],
                vec![SineTerm::new(1.0, 0.29, 0.5), SineTerm::new(0.6, 0.47, 2.2)],
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for term in self.joints.iter().flatten() {
            if !(term.frequency > 0.0) || !term.amplitude.is_finite() || !term.phase.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "trajectory term {term:?} needs a positive frequency and finite amplitude/phase"
                )));
            }
        }
        Ok(())
    }

    /// Analytic state at time `t` seconds.
    pub fn state_at(&self, t: f64) -> JointState {
        let mut s = JointState::default();
        for (j, terms) in self.joints.iter().enumerate() {
            for term in terms {
                let w = 2.0 * std::f64::consts::PI * term.frequency;
                let (sn, cs) = (w * t + term.phase).sin_cos();
                s.q[j] += term.amplitude * sn;
                s.qd[j] += term.amplitude * w * cs;
                s.qdd[j] -= term.amplitude * w * w * sn;
            }
        }
        s
    }
}

/// Samples `spec` at `tᵢ = i / rate_hz` for `i < n_samples`.
pub fn trajectory(spec: &TrajectorySpec, rate_hz: f64, n_samples: usize) -> Result<Vec<JointState>> {
    spec.validate()?;
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(Error::InvalidArgument(format!("sample rate must be positive, got {rate_hz}")));
    }
    Ok((0..n_samples)
        .map(|i| spec.state_at(i as f64 / rate_hz))
        .collect())
}
