//! Dense upper-triangular factors with Givens-rotation rank-1 updates.
//!
//! A factor `R` represents the symmetric positive definite matrix `RᵀR`.
//! Appending a row `z` to the stacked system changes that matrix to
//! `RᵀR + zᵀz`; [`UpperTriangular::rank1_update`] re-triangularizes the
//! `(b + 1) × b` stack `[R; z]` in `O(b²)` by zeroing `z` left to right
//! with one rotation per pivot.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Coefficients `(c, s)` of the rotation that maps `(a, b)` to `(r, 0)`
/// with `r = √(a² + b²) ≥ 0`.
///
/// `(0, 0)` yields the identity rotation.
pub fn givens_coefficients(a: f64, b: f64) -> (f64, f64) {
    let (c, s, _) = givens(a, b);
    (c, s)
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        // Covers (0, 0) as well: nothing to annihilate.
        return if a >= 0.0 {
            (1.0, 0.0, a)
        } else {
            (-1.0, 0.0, -a)
        };
    }
    let r = a.hypot(b);
    (a / r, b / r, r)
}

/// Upper-triangular `b × b` factor stored densely in row-major order.
///
/// Entries strictly below the diagonal are always zero and the diagonal is
/// strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct UpperTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    /// `alpha · I_dim`. Panics unless `alpha > 0` and `dim > 0`.
    pub fn scaled_identity(dim: usize, alpha: f64) -> Self {
        assert!(dim > 0, "factor dimension must be positive");
        assert!(alpha > 0.0 && alpha.is_finite(), "diagonal must be positive");
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = alpha;
        }
        Self { dim, data }
    }

    /// Validates and copies a dense square matrix.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "upper-triangular factor must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite("factor"));
                }
                if i > j && v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) below the diagonal is non-zero"
                    )));
                }
                if i == j && v <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                data[i * dim + j] = v;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Full row `i`, including the leading zeros.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |i| self.get(i, i))
    }

    pub fn min_diagonal(&self) -> f64 {
        self.diagonal().fold(f64::INFINITY, f64::min)
    }

    /// `RᵀR`.
    pub fn gram(&self) -> DMatrix<f64> {
        let r = self.to_dmatrix();
        r.transpose() * r
    }

    /// In-place update so that the new factor satisfies
    /// `R'ᵀR' = RᵀR + zᵀz`.
    ///
    /// Panics if `z.len() != self.dim()`.
    pub fn rank1_update(&mut self, z: &[f64]) {
        let mut work = z.to_vec();
        self.rank1_update_augmented(&mut work, &mut [], &mut []);
    }

    /// Rank-1 update that also carries `t` right-hand-side columns through
    /// the same rotations.
    ///
    /// `rhs` holds a `dim × t` matrix in row-major order and `u` the `t`
    /// entries appended below it. On return `R'ᵀ·rhs' = Rᵀ·rhs + zᵀu`,
    /// which keeps `rhs = R⁻ᵀ·(ZᵀU)` current. `z` and `u` are consumed as
    /// workspace.
    pub fn rank1_update_augmented(&mut self, z: &mut [f64], rhs: &mut [f64], u: &mut [f64]) {
        let n = self.dim;
        let t = u.len();
        assert_eq!(z.len(), n, "update row has wrong length");
        assert_eq!(rhs.len(), n * t, "right-hand side has wrong shape");

        for i in 0..n {
            let zi = z[i];
            if zi == 0.0 {
                continue;
            }
            let row = &mut self.data[i * n..(i + 1) * n];
            let (c, s, r) = givens(row[i], zi);
            row[i] = r;
            z[i] = 0.0;
            for (rj, zj) in row[i + 1..].iter_mut().zip(z[i + 1..].iter_mut()) {
                let a = *rj;
                let b = *zj;
                *rj = c * a + s * b;
                *zj = c * b - s * a;
            }
            for (cj, uj) in rhs[i * t..(i + 1) * t].iter_mut().zip(u.iter_mut()) {
                let a = *cj;
                let b = *uj;
                *cj = c * a + s * b;
                *uj = c * b - s * a;
            }
        }

        debug_assert!(
            self.diagonal().all(|d| d > 0.0 && d.is_finite()),
            "factor diagonal lost positivity (min {})",
            self.min_diagonal()
        );
    }

    /// Solves `Rᵀ x = rhs` in place (forward substitution).
    pub fn solve_transposed_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let row = self.row(i);
            let xi = x[i] / row[i];
            x[i] = xi;
            if xi != 0.0 {
                for (xj, rij) in x[i + 1..].iter_mut().zip(&row[i + 1..]) {
                    *xj -= rij * xi;
                }
            }
        }
    }

    /// Solves `R x = rhs` in place (back substitution).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        assert_eq!(x.len(), n);
        for i in (0..n).rev() {
            let row = self.row(i);
            let tail: f64 = row[i + 1..]
                .iter()
                .zip(&x[i + 1..])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - tail) / row[i];
        }
    }

    /// `W` with `RᵀR·W = B`, via `R \ (Rᵀ \ B)` column by column.
    pub fn solve_two_triangular(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.dim, "right-hand side has wrong row count");
        let mut w = b.clone();
        for mut col in w.column_iter_mut() {
            let x = col.as_mut_slice();
            self.solve_transposed_in_place(x);
            self.solve_in_place(x);
        }
        w
    }
}

/// Value-consuming form of [`UpperTriangular::rank1_update`].
pub fn cholesky_rank1_update(mut r: UpperTriangular, z: &[f64]) -> UpperTriangular {
    r.rank1_update(z);
    r
}

/// Free-function form of [`UpperTriangular::solve_two_triangular`].
pub fn solve_two_triangular(r: &UpperTriangular, b: &DMatrix<f64>) -> DMatrix<f64> {
    r.solve_two_triangular(b)
}

// Serialized as the packed upper triangle, row by row.
#[derive(Serialize, Deserialize)]
struct PackedUpper {
    dim: usize,
    upper: Vec<f64>,
}

impl Serialize for UpperTriangular {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim;
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            upper.extend_from_slice(&self.row(i)[i..]);
        }
        PackedUpper { dim: n, upper }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UpperTriangular {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let p = PackedUpper::deserialize(deserializer)?;
        let n = p.dim;
        if n == 0 || p.upper.len() != n * (n + 1) / 2 {
            return Err(D::Error::custom("packed factor has inconsistent length"));
        }
        let mut data = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            let len = n - i;
            data[i * n + i..(i + 1) * n].copy_from_slice(&p.upper[k..k + len]);
            k += len;
            if !(data[i * n + i] > 0.0) {
                return Err(D::Error::custom("factor diagonal must be positive"));
            }
        }
        Ok(Self { dim: n, data })
    }
}
