//! Multi-output recursive regularized least squares.
//!
//! The estimator keeps `A = ZᵀZ + λI` through its Cholesky factor `R`
//! (`A = RᵀR`, `R₀ = √λ·I`) and the cross product `B = ZᵀU`. Each new
//! row costs `O(b²)` regardless of how many rows came before.
//!
//! Alongside `B` the state carries `C = R⁻ᵀB`, rotated together with `R`
//! during every update. The weights are then a single back substitution
//! away (`W = R \ C`), and a prediction for a new row needs only one
//! forward substitution, so neither requires the full two-sided solve.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::UpperTriangular;

/// One supervised row `(z, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedRow {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl SupervisedRow {
    pub fn new(z: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        check_finite("sample input", &z)?;
        check_finite("sample target", &u)?;
        Ok(Self { z, u })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RrlsState {
    input_dim: usize,
    output_dim: usize,
    lambda: f64,
    factor: UpperTriangular,
    /// `ZᵀU`, `input_dim × output_dim`.
    cross: DMatrix<f64>,
    /// `R⁻ᵀ·ZᵀU` in row-major order.
    projected: Vec<f64>,
    weights: DMatrix<f64>,
    fresh: bool,
    samples_seen: u64,
}

impl RrlsState {
    pub fn new(input_dim: usize, output_dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLambda(lambda));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument(
                "input and output dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            input_dim,
            output_dim,
            lambda,
            factor: UpperTriangular::scaled_identity(input_dim, lambda.sqrt()),
            cross: DMatrix::zeros(input_dim, output_dim),
            projected: vec![0.0; input_dim * output_dim],
            weights: DMatrix::zeros(input_dim, output_dim),
            fresh: true,
            samples_seen: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    pub fn factor(&self) -> &UpperTriangular {
        &self.factor
    }

    /// Accumulated `ZᵀU`.
    pub fn cross_product(&self) -> &DMatrix<f64> {
        &self.cross
    }

    /// Whether the cached weights reflect every update so far.
    pub fn is_fresh(&self) -> bool {
        self.fresh
    }

    /// Cached weights, if fresh.
    pub fn weights(&self) -> Option<&DMatrix<f64>> {
        self.fresh.then_some(&self.weights)
    }

    /// Incorporates one row. Rejected samples leave the state untouched.
    pub fn update(&mut self, z: &[f64], u: &[f64]) -> Result<()> {
        check_len("update row", self.input_dim, z.len())?;
        check_len("update target", self.output_dim, u.len())?;
        check_finite("update row", z)?;
        check_finite("update target", u)?;
        self.update_unchecked(z, u);
        Ok(())
    }

    pub fn update_row(&mut self, row: &SupervisedRow) -> Result<()> {
        self.update(&row.z, &row.u)
    }

    fn update_unchecked(&mut self, z: &[f64], u: &[f64]) {
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                for (bij, &zi) in self.cross.column_mut(j).iter_mut().zip(z) {
                    *bij += zi * uj;
                }
            }
        }
        let mut zw = z.to_vec();
        let mut uw = u.to_vec();
        self.factor
            .rank1_update_augmented(&mut zw, &mut self.projected, &mut uw);
        self.samples_seen += 1;
        self.fresh = false;
    }

    /// Incorporates a block of rows that share a scalar output: row `i` of
    /// `rows` is paired with `targets[i]`.
    ///
    /// This is how a multi-row regressor observation `(Φ, y)` enters an
    /// estimator whose unknown is a single parameter vector, so the state
    /// must have `output_dim == 1`. Equivalent to calling [`update`] once
    /// per row, in order.
    ///
    /// [`update`]: RrlsState::update
    pub fn update_block(&mut self, rows: &DMatrix<f64>, targets: &[f64]) -> Result<()> {
        check_len("block output dimension", 1, self.output_dim)?;
        check_len("block columns", self.input_dim, rows.ncols())?;
        check_len("block targets", rows.nrows(), targets.len())?;
        check_finite("block rows", rows.as_slice())?;
        check_finite("block targets", targets)?;
        let mut z = vec![0.0; self.input_dim];
        for (i, &target) in targets.iter().enumerate() {
            for (zj, v) in z.iter_mut().zip(rows.row(i).iter()) {
                *zj = *v;
            }
            self.update_unchecked(&z, &[target]);
        }
        Ok(())
    }

    /// Weights `W` with `RᵀR·W = B`; cached until the next update.
    pub fn solve(&mut self) -> &DMatrix<f64> {
        if !self.fresh {
            let n = self.input_dim;
            let t = self.output_dim;
            let mut col = vec![0.0; n];
            for j in 0..t {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = self.projected[i * t + j];
                }
                self.factor.solve_in_place(&mut col);
                self.weights.column_mut(j).copy_from_slice(&col);
            }
            self.fresh = true;
        }
        &self.weights
    }

    /// `z·W`. Uses the cached weights when fresh, otherwise computes
    /// `(R⁻ᵀzᵀ)ᵀ·C` without touching the cache.
    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("prediction input", self.input_dim, z.len())?;
        let t = self.output_dim;
        let mut out = vec![0.0; t];
        if self.fresh {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.weights.column(j).iter().zip(z).map(|(w, x)| w * x).sum();
            }
        } else {
            let mut v = z.to_vec();
            self.factor.solve_transposed_in_place(&mut v);
            for (vi, c_row) in v.iter().zip(self.projected.chunks_exact(t)) {
                if *vi != 0.0 {
                    for (o, c) in out.iter_mut().zip(c_row) {
                        *o += vi * c;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `RᵀR`, i.e. `λI + Σ zᵀz`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.factor.gram()
    }
}

/// Closed-form `(ZᵀZ + λI)⁻¹ZᵀU`.
pub fn batch_rls(z: &DMatrix<f64>, u: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    check_len("batch rows", z.nrows(), u.nrows())?;
    let b = z.ncols();
    let a = z.tr_mul(z) + DMatrix::<f64>::identity(b, b) * lambda;
    let rhs = z.tr_mul(u);
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_examples() {
        let s = RrlsState::new(2, 1, 4.0).unwrap();
        assert_eq!(s.factor().to_dmatrix(), DMatrix::identity(2, 2) * 2.0);
        assert_eq!(s.cross_product(), &DMatrix::zeros(2, 1));
        assert_eq!(s.samples_seen(), 0);

        let s = RrlsState::new(1, 1, 1.0).unwrap();
        assert_eq!(s.factor().get(0, 0), 1.0);

        assert!(matches!(RrlsState::new(3, 2, 0.0), Err(Error::InvalidLambda(_))));
        assert!(RrlsState::new(3, 2, -1.0).is_err());
        assert!(RrlsState::new(3, 2, f64::NAN).is_err());
    }

    #[test]
    fn single_sample_closed_form() {
        let mut s = RrlsState::new(1, 1, 1.0).unwrap();
        s.update(&[1.0], &[1.0]).unwrap();
        assert!((s.gram()[(0, 0)] - 2.0).abs() < 1e-15);
        assert_eq!(s.cross_product()[(0, 0)], 1.0);
        assert!((s.solve()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_row_leaves_state_unchanged() {
        let mut s = RrlsState::new(3, 2, 0.5).unwrap();
        s.update(&[1.0, -2.0, 0.5], &[0.3, 0.1]).unwrap();
        let r = s.factor().clone();
        let b = s.cross_product().clone();
        s.update(&[0.0; 3], &[0.0; 2]).unwrap();
        assert_eq!(s.factor(), &r);
        assert_eq!(s.cross_product(), &b);
    }

    #[test]
    fn rejected_sample_leaves_state_unchanged() {
        let mut s = RrlsState::new(2, 1, 1.0).unwrap();
        s.update(&[1.0, 2.0], &[3.0]).unwrap();
        let before = s.clone();
        assert!(matches!(s.update(&[f64::NAN, 0.0], &[1.0]), Err(Error::NonFinite(_))));
        assert!(s.update(&[1.0], &[1.0]).is_err());
        assert!(s.update(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert_eq!(s.factor(), before.factor());
        assert_eq!(s.cross_product(), before.cross_product());
        assert_eq!(s.samples_seen(), 1);
    }

    #[test]
    fn fresh_state_solves_to_zero() {
        let mut s = RrlsState::new(4, 2, 1.0).unwrap();
        assert_eq!(s.solve(), &DMatrix::zeros(4, 2));
        assert_eq!(s.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn block_update_matches_sequential_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = 5;
        let rows = DMatrix::from_fn(6, b, |_, _| rng.random_range(-1.0..1.0));
        let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut blocked = RrlsState::new(b, 1, 0.1).unwrap();
        blocked.update_block(&rows, &targets).unwrap();

        let mut sequential = RrlsState::new(b, 1, 0.1).unwrap();
        for (i, t) in targets.iter().enumerate() {
            let z: Vec<f64> = rows.row(i).iter().copied().collect();
            sequential.update(&z, &[*t]).unwrap();
        }
        assert_eq!(blocked.factor(), sequential.factor());
        assert_eq!(blocked.cross_product(), sequential.cross_product());
    }

    #[test]
    fn block_with_single_row_is_single_update() {
        let rows = DMatrix::from_row_slice(1, 3, &[0.2, -1.0, 4.0]);
        let mut a = RrlsState::new(3, 1, 1.0).unwrap();
        a.update_block(&rows, &[2.0]).unwrap();
        let mut b = RrlsState::new(3, 1, 1.0).unwrap();
        b.update(&[0.2, -1.0, 4.0], &[2.0]).unwrap();
        assert_eq!(a.factor(), b.factor());
        assert_eq!(a.cross_product(), b.cross_product());
    }

    #[test]
    fn block_with_zero_second_row() {
        let rows = DMatrix::from_row_slice(2, 3, &[0.2, -1.0, 4.0, 0.0, 0.0, 0.0]);
        let mut a = RrlsState::new(3, 1, 1.0).unwrap();
        a.update_block(&rows, &[2.0, 0.0]).unwrap();
        let mut b = RrlsState::new(3, 1, 1.0).unwrap();
        b.update(&[0.2, -1.0, 4.0], &[2.0]).unwrap();
        assert_eq!(a.factor(), b.factor());
        assert_eq!(a.cross_product(), b.cross_product());
    }

    #[test]
    fn block_requires_scalar_output() {
        let mut s = RrlsState::new(3, 2, 1.0).unwrap();
        let rows = DMatrix::zeros(2, 3);
        assert!(matches!(
            s.update_block(&rows, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut s = RrlsState::new(3, 1, 1.0).unwrap();
        assert!(s.update_block(&rows, &[0.0]).is_err());
        assert!(s.update_block(&DMatrix::zeros(2, 4), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn predict_identity_weights() {
        // b = t with B = 2I and λ = 1 after unit rows gives W = I.
        let mut s = RrlsState::new(2, 2, 1.0).unwrap();
        s.update(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        s.update(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        let w = s.solve().clone();
        assert!((w - DMatrix::identity(2, 2)).amax() < 1e-15);
        let p = s.predict(&[1.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert_eq!(s.predict(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn stale_and_fresh_predictions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = RrlsState::new(7, 3, 0.01).unwrap();
        for _ in 0..40 {
            let z: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            s.update(&z, &u).unwrap();
        }
        let z: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let stale = s.predict(&z).unwrap();
        let w = s.solve().clone();
        let explicit = DMatrix::from_row_slice(1, 7, &z) * &w;
        let fresh = s.predict(&z).unwrap();
        for j in 0..3 {
            assert!((fresh[j] - explicit[(0, j)]).abs() < 1e-12);
            assert!((stale[j] - explicit[(0, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_examples() {
        let w = batch_rls(&DMatrix::identity(3, 3), &DMatrix::identity(3, 3), 1.0).unwrap();
        assert!((w - DMatrix::identity(3, 3) * 0.5).amax() < 1e-15);

        let w = batch_rls(&DMatrix::zeros(0, 4), &DMatrix::zeros(0, 2), 1.0).unwrap();
        assert_eq!(w, DMatrix::zeros(4, 2));

        assert!(matches!(
            batch_rls(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2), 0.0),
            Err(Error::InvalidLambda(_))
        ));
    }
}
