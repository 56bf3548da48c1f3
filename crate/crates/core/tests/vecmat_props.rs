use nalgebra::DMatrix;
use nzs_core::vecmat::SparseMatrix;
use proptest::prelude::*;

/// Random sparse matrix as dense rows, with roughly `density` nonzeros.
fn dense_matrix(max_dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![3 => Just(0.0), 2 => -10.0..10.0f64], c),
            r,
        )
    })
}

fn dense_mul(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().zip(x).fold(0.0, |s, (a, b)| s + a * b))
        .collect()
}

fn dense_mul_t(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = rows[0].len();
    (0..n)
        .map(|j| rows.iter().zip(y).fold(0.0, |s, (row, yi)| s + row[j] * yi))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spmv_equals_dense_reference(rows in dense_matrix(12), seed in any::<u64>()) {
        let m = SparseMatrix::from_dense(&rows).unwrap();
        let n = rows[0].len();
        let x: Vec<f64> = (0..n).map(|j| ((seed >> (j % 60)) & 0xff) as f64 / 32.0 - 4.0).collect();
        let got = m.spmv(&x).unwrap();
        let want = dense_mul(&rows, &x);
        prop_assert_eq!(got.as_slice(), want.as_slice());
    }

    #[test]
    fn spmv_transpose_equals_dense_reference(rows in dense_matrix(12), seed in any::<u64>()) {
        let m = SparseMatrix::from_dense(&rows).unwrap();
        let y: Vec<f64> = (0..rows.len()).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 32.0 - 4.0).collect();
        let got = m.spmv_transpose(&y).unwrap();
        let want = dense_mul_t(&rows, &y);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn spectral_norm_is_absolutely_homogeneous(rows in dense_matrix(10), c in -5.0..5.0f64) {
        let m = SparseMatrix::from_dense(&rows).unwrap();
        let tol = 1e-9;
        let base = m.spectral_norm(tol, 100_000, 1).unwrap();
        let scaled = m.scaled(c).spectral_norm(tol, 100_000, 1).unwrap();
        prop_assert!((scaled - c.abs() * base).abs() <= 2.0 * tol * c.abs() * base + 1e-12);
    }
}

#[test]
fn spectral_norm_matches_dense_svd() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
    for _ in 0..5 {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let svd = DMatrix::from_row_slice(50, 50, &flat).singular_values();
        let oracle = svd.max();
        let got = SparseMatrix::from_dense(&rows).unwrap().spectral_norm(1e-10, 1_000_000, 7).unwrap();
        assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
    }
}
