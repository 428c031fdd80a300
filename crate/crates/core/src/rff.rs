//! Random Fourier features for the Gaussian kernel
//! `k(x, x') = exp(−‖x − x'‖² / 2σ²)`.
//!
//! Frequencies are drawn from `N(0, σ⁻²·I_d)`, the spectral density of that
//! kernel. Each of the `D/2` frequencies `ω` contributes the pair
//! `√(2/D)·(cos xω, sin xω)`, so `φ(x)·φ(x')ᵀ` averages
//! `cos((x − x')ω)` over the draws and is an unbiased kernel estimate.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};

/// Lower bound applied to every per-coordinate scale of a [`Normalizer`].
pub const SCALE_FLOOR: f64 = 1e-8;

/// Frozen random feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    input_dim: usize,
    feature_dim: usize,
    sigma: f64,
    seed: u64,
    /// `(D/2) × d`, row-major; row `j` is `ω_j`.
    frequencies: Vec<f64>,
}

impl RffMap {
    /// Draws `feature_dim / 2` frequencies deterministically from `seed`.
    pub fn sample(input_dim: usize, feature_dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if feature_dim == 0 || feature_dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "feature dimension must be a positive even number, got {feature_dim}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive, got {sigma}"
            )));
        }
        let normal = Normal::new(0.0, 1.0 / sigma)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frequencies = (0..feature_dim / 2 * input_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Ok(Self {
            input_dim,
            feature_dim,
            sigma,
            seed,
            frequencies,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequency(&self, j: usize) -> &[f64] {
        &self.frequencies[j * self.input_dim..(j + 1) * self.input_dim]
    }

    /// `φ(x)`, interleaved `(cos, sin)` per frequency.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.feature_dim];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("feature map input", self.input_dim, x.len())?;
        check_len("feature map output", self.feature_dim, out.len())?;
        let scale = (2.0 / self.feature_dim as f64).sqrt();
        for (omega, pair) in self
            .frequencies
            .chunks_exact(self.input_dim)
            .zip(out.chunks_exact_mut(2))
        {
            let phase: f64 = omega.iter().zip(x).map(|(w, v)| w * v).sum();
            let (s, c) = phase.sin_cos();
            pair[0] = scale * c;
            pair[1] = scale * s;
        }
        Ok(())
    }

    /// `φ(x)·φ(x')ᵀ`.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.apply(x)?;
        let b = self.apply(y)?;
        Ok(a.iter().zip(&b).map(|(p, q)| p * q).sum())
    }

    /// Plain-text form: a header of `key value` lines followed by one
    /// whitespace-separated frequency row per line.
    ///
    /// ```text
    /// # rff-map v1
    /// input_dim 8
    /// feature_dim 1000
    /// sigma 3.1e0
    /// seed 42
    /// frequencies
    /// <d values>
    /// ...
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# rff-map v1");
        let _ = writeln!(s, "input_dim {}", self.input_dim);
        let _ = writeln!(s, "feature_dim {}", self.feature_dim);
        let _ = writeln!(s, "sigma {:e}", self.sigma);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "frequencies");
        for row in self.frequencies.chunks_exact(self.input_dim) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> std::result::Result<String, String> {
            let line = lines.next().ok_or_else(|| format!("missing `{key}`"))?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(k), Some(v)) if k == key => Ok(v.to_string()),
                _ => Err(format!("expected `{key} <value>`, found `{line}`")),
            }
        };
        let input_dim: usize = header("input_dim")?.parse().map_err(|e| format!("{e}"))?;
        let feature_dim: usize = header("feature_dim")?.parse().map_err(|e| format!("{e}"))?;
        let sigma: f64 = header("sigma")?.parse().map_err(|e| format!("{e}"))?;
        let seed: u64 = header("seed")?.parse().map_err(|e| format!("{e}"))?;
        match lines.next() {
            Some(l) if l.trim() == "frequencies" => {}
            other => return Err(format!("expected `frequencies`, found {other:?}")),
        }
        let mut frequencies = Vec::with_capacity(feature_dim / 2 * input_dim);
        for line in lines {
            let before = frequencies.len();
            for tok in line.split_whitespace() {
                frequencies.push(tok.parse::<f64>().map_err(|e| format!("{e}: `{tok}`"))?);
            }
            if frequencies.len() - before != input_dim {
                return Err(format!("frequency row has wrong length: `{line}`"));
            }
        }
        if feature_dim % 2 != 0 || frequencies.len() != feature_dim / 2 * input_dim {
            return Err("frequency matrix does not match the declared dimensions".into());
        }
        Ok(Self {
            input_dim,
            feature_dim,
            sigma,
            seed,
            frequencies,
        })
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|msg| Error::parse(path, msg))
    }
}

/// Exact Gaussian kernel.
pub fn kernel_exact(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// Median pairwise Euclidean distance between the rows of `points`.
///
/// At most `max_points` evenly strided rows are used.
pub fn median_heuristic(points: &DMatrix<f64>, max_points: usize) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "median heuristic needs at least two points".into(),
        ));
    }
    let stride = n.div_ceil(max_points.max(2));
    let rows: Vec<Vec<f64>> = (0..n)
        .step_by(stride)
        .map(|i| points.row(i).iter().copied().collect())
        .collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let sq: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(sq.sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let median = *median;
    if median > 0.0 && median.is_finite() {
        Ok(median)
    } else {
        Err(Error::InvalidArgument(
            "median pairwise distance is zero; points are degenerate".into(),
        ))
    }
}

/// Exact kernel RLS, `α = (K + λI)⁻¹Y`. Only meant for small `n`.
#[derive(Clone, Debug)]
pub struct KrlsOracle {
    centers: DMatrix<f64>,
    alpha: DMatrix<f64>,
    sigma: f64,
}

impl KrlsOracle {
    pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, sigma: f64, lambda: f64) -> Result<Self> {
        let alpha = krls_oracle_fit(x, y, sigma, lambda)?;
        Ok(Self {
            centers: x.clone(),
            alpha,
            sigma,
        })
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    /// `Σᵢ αᵢ k(xᵢ, x)`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("oracle input", self.centers.ncols(), x.len())?;
        let t = self.alpha.ncols();
        let mut out = vec![0.0; t];
        for i in 0..self.centers.nrows() {
            let c: Vec<f64> = self.centers.row(i).iter().copied().collect();
            let k = kernel_exact(&c, x, self.sigma);
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.alpha[(i, j)] * k;
            }
        }
        Ok(out)
    }
}

pub fn krls_oracle_fit(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    sigma: f64,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    check_len("oracle targets", x.nrows(), y.nrows())?;
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel_exact(&rows[i], &rows[j], sigma));
    for i in 0..n {
        k[(i, i)] += lambda;
    }
    let chol = k.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(y))
}

/// Per-coordinate affine normalization, frozen after fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    /// Column means and (population) standard deviations of `x`, with each
    /// scale floored at [`SCALE_FLOOR`].
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "normalizer needs at least two rows, got {n}"
            )));
        }
        check_finite("normalizer data", x.as_slice())?;
        let nf = n as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / nf;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf;
            mean.push(m);
            scale.push(var.sqrt().max(SCALE_FLOOR));
        }
        Ok(Self { mean, scale })
    }

    /// A normalizer that leaves inputs unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("normalizer input", self.mean.len(), x.len())?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}
