//! Simulated datasets and their CSV form.
//!
//! Columns: `t, q1, q2, qd1, qd2, qdd1, qdd2, y1, y2`, header row first.
//! Values are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory samples exactly.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rbd::{self, JointState, PlanarArmModel, TrajectorySpec, N_DOF};

use super::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    /// Training motion.
    A,
    /// Test motion.
    B,
}

impl Which {
    pub fn file_name(self) -> &'static str {
        match self {
            Which::A => "dataset_a.csv",
            Which::B => "dataset_b.csv",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Which::A => 0xA,
            Which::B => 0xB,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: JointState,
    pub y: [f64; N_DOF],
}

pub fn header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "qd", "qdd", "y"] {
        for j in 1..=N_DOF {
            h.push(format!("{prefix}{j}"));
        }
    }
    h
}

/// Samples `spec` and simulates the plant outputs; noise is drawn from a
/// generator seeded by `noise_seed`.
pub fn simulate(
    plant: &PlanarArmModel,
    spec: &TrajectorySpec,
    rate_hz: f64,
    n: usize,
    noise_seed: u64,
) -> Result<Vec<Sample>> {
    plant.validate()?;
    let states = rbd::trajectory(spec, rate_hz, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    Ok(states
        .into_iter()
        .enumerate()
        .map(|(i, state)| Sample {
            t: i as f64 / rate_hz,
            state,
            y: rbd::simulate_output(plant, &state, &mut rng),
        })
        .collect())
}

/// Dataset A (`n_train` samples) or B (`n_test_folds · fold_size`).
pub fn generate_dataset(config: &ExperimentConfig, which: Which, seed: u64) -> Result<Vec<Sample>> {
    let (spec, n) = match which {
        Which::A => (config.trajectory_a(), config.n_train),
        Which::B => (config.trajectory_b(), config.n_test()),
    };
    let noise_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ which.salt();
    simulate(&config.plant(), &spec, config.rate_hz, n, noise_seed)
}

pub fn write_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(header()).map_err(|e| csv_io(path, e))?;
    let mut record = Vec::with_capacity(1 + 4 * N_DOF);
    for s in samples {
        record.clear();
        record.push(s.t.to_string());
        record.extend(s.state.flatten().iter().map(f64::to_string));
        record.extend(s.y.iter().map(f64::to_string));
        w.write_record(&record).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let expected = header();
    let found: Vec<String> = r
        .headers()
        .map_err(|e| csv_io(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != expected {
        return Err(Error::parse(path, format!("unexpected header {found:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let vals = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, format!("row {}: {e}", line + 1)))?;
        if vals.len() != expected.len() {
            return Err(Error::parse(path, format!("row {} has {} fields", line + 1, vals.len())));
        }
        let state = JointState::from_flat(&vals[1..1 + 3 * N_DOF])?;
        out.push(Sample {
            t: vals[0],
            state,
            y: [vals[1 + 3 * N_DOF], vals[2 + 3 * N_DOF]],
        });
    }
    Ok(out)
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path, e)
    }
}
