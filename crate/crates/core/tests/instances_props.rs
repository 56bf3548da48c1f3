use nzs_core::game::{probe_structure, GameSpec, JointPoint, QueryLedger};
use nzs_core::instances::*;
use nzs_core::saddle::{solve_eg, SolverConfig};
use nzs_core::vecmat::SparseMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> SparseMatrix {
    let dense: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-1.0..1.0) })
                .collect()
        })
        .collect();
    SparseMatrix::from_dense(&dense).unwrap()
}

#[test]
fn split_recombines_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 7, 9);
        let (p, n) = split_pos_neg(&m);
        assert!(p.values().iter().chain(n.values()).all(|&v| v >= 0.0));
        assert_eq!(p.lincomb(1.0, &n, -1.0).unwrap().to_dense(), m.to_dense());
    }
}

#[test]
fn fee_identities_hold_entrywise() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 6, 5);
        let rho = rng.gen_range(0.0..0.2);
        let (a, b) = apply_transaction_fee(&m, rho).unwrap();
        let (md, ad, bd) = (m.to_dense(), a.to_dense(), b.to_dense());
        for i in 0..6 {
            for j in 0..5 {
                let v = md[i][j];
                // A + B = -rho |M| and A - B = (2 - rho) M, up to one rounding of v
                assert!((ad[i][j] + bd[i][j] + rho * v.abs()).abs() <= f64::EPSILON * v.abs());
                assert!((ad[i][j] - bd[i][j] - (2.0 - rho) * v).abs() <= 4.0 * f64::EPSILON * v.abs());
            }
        }
    }
}

#[test]
fn coupling_norm_scales_with_fee() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let m = random_matrix(&mut rng, 8, 8);
        let abs_norm = m.map_values(f64::abs).spectral_norm(1e-12, 1_000_000, 0).unwrap();
        let rho = rng.gen_range(0.001..0.1);
        let game = MatrixGame::with_fee(&m, rho, 0.0, 0.0).unwrap();
        let beta = game.coupling_matrix().spectral_norm(1e-12, 1_000_000, 0).unwrap();
        assert!((beta - 0.5 * rho * abs_norm).abs() <= 1e-9 * abs_norm);
    }
}

proptest! {
    #[test]
    fn reformulation_weights_respect_budget(mu in 1e-3..10.0f64, nu in 1e-3..10.0f64, frac in 0.0..=1.0f64) {
        let beta = frac * 0.5 * (mu * nu).sqrt();
        let (b1, b2) = reformulation_weights(beta, mu, nu).unwrap();
        prop_assert!(b1 <= 0.5 * mu * (1.0 + 1e-14));
        prop_assert!(b2 <= 0.5 * nu * (1.0 + 1e-14));
        prop_assert!((b1 * b2 - beta * beta).abs() <= 1e-14 * beta * beta);
    }

    #[test]
    fn reformulation_rejects_excess_coupling(mu in 1e-3..10.0f64, nu in 1e-3..10.0f64, over in 1.001..10.0f64) {
        let beta = over * 0.5 * (mu * nu).sqrt();
        prop_assert!(reformulation_weights(beta, mu, nu).is_err());
    }
}

#[test]
fn paper_scale_generator_stores_exact_count() {
    let exp = gen_sparse_experiment(10_000, 10_000, 100_000, 0, 1e-4, 1.0, false).unwrap();
    assert_eq!(exp.matrix.nnz(), 100_000);
    assert!(exp.matrix.values().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn normalized_generator_has_unit_norm() {
    let exp = gen_sparse_experiment(300, 200, 3_000, 7, 1e-4, 1.0, true).unwrap();
    let norm = exp.matrix.spectral_norm(1e-10, 1_000_000, 99).unwrap();
    assert!((norm - 1.0).abs() <= 1e-6);
}

fn tight_solve(game: &GameSpec) -> JointPoint {
    let report = solve_eg(game, &SolverConfig::new(1e-22, 2_000_000)).unwrap();
    assert!(report.certified_sq_distance.unwrap() <= 1e-22);
    report.point
}

#[test]
fn bilinear_reformulation_keeps_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let m = random_matrix(&mut rng, 3, 3);
    let game = MatrixGame::with_fee(&m, 0.05, 0.8, 0.6).unwrap();
    let reformulated = reformulate_bilinear(&game).unwrap();
    assert!(reformulated.beta > 0.0);
    let a = tight_solve(&game.to_game().unwrap());
    let b = tight_solve(&reformulated.to_game().unwrap());
    assert!(a.dist_sq(&b).sqrt() <= 1e-8);
}

#[test]
fn bilinear_reformulation_makes_coupling_convex() {
    let m = SparseMatrix::from_dense(&[vec![300.0, -200.0], vec![-100.0, 400.0]]).unwrap();
    let scale = 1.0 / 500.0;
    let game = MatrixGame::with_fee(&m.scaled(scale), 0.01, 0.5, 0.5).unwrap();
    let r = reformulate_bilinear(&game).unwrap();
    assert!(r.beta <= 0.5 * (0.5f64 * 0.5).sqrt());
    let spec = r.to_game().unwrap();
    let report = probe_structure(&spec, 500, 4).unwrap();
    assert!(report.coupling_convexity >= -1e-9, "{report:?}");
}

#[test]
fn general_reformulation_keeps_equilibrium_and_convexity() {
    let base = gen_quadratic_known_ne(3, 2, 1.0, 0.8, 0.3, 0.7, 8).unwrap();
    let shifted = reformulate_general(&base, 0.35).unwrap();
    let report = probe_structure(&shifted, 500, 5).unwrap();
    assert!(report.coupling_convexity >= -1e-9);
    let z = tight_solve(&shifted);
    assert!(z.dist_sq(base.known_ne.as_ref().unwrap()).sqrt() <= 1e-8);

    let same = reformulate_general(&gen_quadratic_known_ne(3, 2, 1.0, 0.8, 0.0, 0.7, 8).unwrap(), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mut ledger = QueryLedger::default();
    for _ in 0..20 {
        let z = JointPoint::new(base.x_set.sample(&mut rng), base.y_set.sample(&mut rng));
        let orig = gen_quadratic_known_ne(3, 2, 1.0, 0.8, 0.0, 0.7, 8).unwrap();
        assert_eq!(same.operator_f(&z, &mut ledger).unwrap(), orig.operator_f(&z, &mut ledger).unwrap());
    }
}

#[test]
fn stackelberg_nash_satisfies_box_variational_inequality() {
    let game = stackelberg_example();
    let z = game.known_ne.clone().unwrap();
    let f = game.operator_f(&z, &mut QueryLedger::default()).unwrap();
    for corner in 0..8u32 {
        let bit = |b: u32| ((corner >> b) & 1) as f64;
        let c = JointPoint::from_vecs(vec![bit(0), 1.0 + bit(1)], vec![-1.0 + bit(2)]).unwrap();
        assert!(f.dot(&c.sub(&z)) >= -1e-10);
    }
}
