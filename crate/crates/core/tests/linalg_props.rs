use std::time::Instant;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiparam_dyn::linalg::{cholesky_rank1_update, UpperTriangular};

fn random_factor(rng: &mut ChaCha8Rng, n: usize) -> UpperTriangular {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = rng.random_range(0.5..2.0);
        for j in i + 1..n {
            m[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    UpperTriangular::from_dmatrix(&m).unwrap()
}

fn outer(z: &[f64]) -> DMatrix<f64> {
    let v = DMatrix::from_column_slice(z.len(), 1, z);
    &v * v.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn rank1_update_preserves_gram(
        dim_index in 0usize..5,
        seed in any::<u64>(),
        scale in 0.01f64..10.0,
    ) {
        let b = [1, 2, 8, 32, 64][dim_index];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_factor(&mut rng, b);
        let z: Vec<f64> = (0..b).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let before = r.gram();
        let updated = cholesky_rank1_update(r, &z);
        let z_sq: f64 = z.iter().map(|v| v * v).sum();
        let err = (updated.gram() - (&before + outer(&z))).norm();
        prop_assert!(err <= 1e-10 * (1.0 + before.norm() + z_sq), "err {err:e}");
        prop_assert!(updated.diagonal().all(|d| d > 0.0));
        for i in 0..b {
            for j in 0..i {
                prop_assert_eq!(updated.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn solve_residual_up_to_condition_1e8(seed in any::<u64>(), log_cond in 0.0f64..8.0) {
        // RᵀR has condition number ≈ (d_max/d_min)² with d the diagonal of
        // a diagonally scaled unit-triangular factor.
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ratio = 10f64.powf(log_cond / 2.0);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ratio.powf(-(i as f64) / (n - 1) as f64);
            for j in i + 1..n {
                m[(i, j)] = 0.1 * rng.random_range(-1.0..1.0) * m[(i, i)];
            }
        }
        let r = UpperTriangular::from_dmatrix(&m).unwrap();
        let b = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let w = r.solve_two_triangular(&b);
        let residual = (r.gram() * &w - &b).norm();
        prop_assert!(residual <= 1e-9 * (1.0 + b.norm()), "residual {residual:e}");
    }
}

#[test]
fn update_cost_grows_quadratically() {
    fn median_time(b: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(b as u64);
        let mut r = UpperTriangular::scaled_identity(b, 1.0);
        let rows: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..b).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut times = Vec::new();
        for _ in 0..7 {
            let start = Instant::now();
            for z in &rows {
                r.rank1_update(z);
            }
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        times[times.len() / 2]
    }
    let small = median_time(256);
    let large = median_time(512);
    let ratio = large / small;
    assert!(ratio <= 5.0, "doubling b multiplied update time by {ratio:.2}");
}
