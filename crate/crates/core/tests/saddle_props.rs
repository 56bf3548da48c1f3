use nalgebra::{DMatrix, DVector};
use nzs_core::diagnostics::deviation_gain;
use nzs_core::game::{GameSpec, JointPoint, QueryKind, QueryLedger};
use nzs_core::icl::{build_subproblem, SaddleSubproblem};
use nzs_core::instances::*;
use nzs_core::saddle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(game: &GameSpec, rng: &mut ChaCha8Rng) -> JointPoint {
    JointPoint::new(game.x_set.sample(rng), game.y_set.sample(rng))
}

fn known_ne_family() -> Vec<GameSpec> {
    let mut games: Vec<GameSpec> = (0..10)
        .map(|s| gen_quadratic_known_ne(3 + s as usize % 3, 2 + s as usize % 4, 0.1 + 0.2 * s as f64, 0.5, 0.3, 1.5, s).unwrap())
        .collect();
    games.push(stackelberg_example());
    games
}

#[test]
fn certificate_upper_bounds_true_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ledger = QueryLedger::default();
    let mut checked = 0;
    for game in known_ne_family() {
        let star = game.known_ne.clone().unwrap();
        let gamma = 1.0 / (2.0 * game.l());
        for _ in 0..100 {
            let z = sample(&game, &mut rng);
            // mix in points near the equilibrium as well
            let z = if rng.gen_bool(0.5) { star.add_scaled(rng.gen_range(1e-6..1e-1), &z.sub(&star)) } else { z };
            let bound = certify_distance(&game, &z, gamma, game.monotone_modulus, &mut ledger).unwrap();
            assert!(bound >= z.dist_sq(&star) * (1.0 - 1e-12), "{bound} < {}", z.dist_sq(&star));
            checked += 1;
        }
        let at_star = certify_distance(&game, &star, gamma, game.monotone_modulus, &mut ledger).unwrap();
        assert!(at_star <= 1e-18);
    }
    assert!(checked >= 1000);
    assert_eq!(ledger.get(QueryKind::Cert), 2 * (checked + 11) as u64);
}

#[test]
fn extragradient_steps_do_not_move_away_from_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut ledger = QueryLedger::default();
    for game in known_ne_family() {
        let star = game.known_ne.clone().unwrap();
        let gamma = 1.0 / (std::f64::consts::SQRT_2 * game.l());
        let mut z = sample(&game, &mut rng);
        for _ in 0..50 {
            let (_, next) = extragradient_step(&game, &z, gamma, &mut ledger, QueryKind::F).unwrap();
            assert!(next.dist_sq(&star) <= z.dist_sq(&star) + 1e-9);
            z = next;
        }
    }
}

#[test]
fn baselines_converge_on_isotropic_quadratic() {
    for seed in 0..5 {
        let game = gen_quadratic_known_ne(4, 4, 1.0, 1.0, 0.0, 0.0, seed).unwrap();
        assert_eq!(game.l(), 1.0);
        let star = game.known_ne.clone().unwrap();
        let cfg = SolverConfig::new(1e-8, 10_000);
        let eg = solve_eg(&game, &cfg).unwrap();
        assert!(eg.converged() && eg.iterations <= 200);
        assert!(eg.point.dist_sq(&star) <= 1e-8);
        let ogda = solve_ogda(&game, &cfg).unwrap();
        assert!(ogda.converged() && ogda.iterations <= 300);
        assert!(ogda.point.dist_sq(&star) <= 1e-8);
    }
}

#[test]
fn ogda_first_step_is_projected_gradient() {
    let game = gen_quadratic_known_ne(3, 2, 0.5, 0.7, 0.2, 1.0, 3).unwrap();
    let z0 = game.initial_point();
    let mut cfg = SolverConfig::new(1e-30, 1);
    cfg.certificate_period = 1_000;
    let report = solve_ogda(&game, &cfg).unwrap();
    let f = game.operator_f(&z0, &mut QueryLedger::default()).unwrap();
    let expected = game.project(&z0.add_scaled(-1.0 / (2.0 * game.l()), &f));
    assert!(report.point.max_abs_diff(&expected) <= 1e-15);
}

#[test]
fn baselines_agree_on_zero_sum_fee_game() {
    let exp = gen_sparse_experiment(40, 30, 300, 5, 0.05, 1.0, true).unwrap();
    let game = exp.game(0.0).unwrap().to_game().unwrap();
    let cfg = SolverConfig::new(1e-14, 1_000_000);
    let eg = solve_eg(&game, &cfg).unwrap();
    let ogda = solve_ogda(&game, &cfg).unwrap();
    assert!(eg.converged() && ogda.converged());
    assert!(eg.point.dist_sq(&ogda.point).sqrt() <= 1e-6);
}

#[test]
fn extraction_at_stackelberg_nash_has_no_gain() {
    let game = stackelberg_example();
    let star = game.known_ne.clone().unwrap();
    let gamma = 1.0 / (std::f64::consts::SQRT_2 * game.l());
    let (z_hat, bound) = extract_approx_ne(&game, &star, gamma, 0.0, &mut QueryLedger::default()).unwrap();
    assert_eq!(bound, 0.0);
    let (gain, _) = deviation_gain(&game, &z_hat).unwrap();
    assert!(gain <= 1e-9);
}

/// `min_x max_y xy + x^2/2 - y^2/2`, essentially without proximal pull.
fn scalar_saddle() -> GameSpec {
    let params = QuadraticParams {
        mu: 1.0,
        nu: 1.0,
        k: vec![vec![1.0]],
        g: vec![vec![0.0; 2]; 2],
        c: vec![0.0; 2],
    };
    quadratic_with_target(&params, &JointPoint::zeros(1, 1)).unwrap()
}

fn subproblem(game: &GameSpec, eta: f64) -> SaddleSubproblem<'_> {
    let center = game.known_ne.clone().unwrap();
    build_subproblem(game, &center, eta, &mut QueryLedger::default()).unwrap()
}

#[test]
fn primal_dual_solves_scalar_saddle() {
    let game = scalar_saddle();
    let sub = subproblem(&game, 1e12);
    let start = JointPoint::from_vecs(vec![0.6], vec![-0.7]).unwrap();
    let opts = ApdOptions::default();
    let report = solve_apd_bilinear_with(&sub, &start, 1e-20, &opts, None).unwrap();
    assert!(report.converged());
    assert!(report.point.norm() <= 1e-10);
}

/// Solution of the affine operator of `problem` by probing it at the basis
/// vectors and solving the resulting dense system.
fn linear_system_solution<P: VariationalProblem>(problem: &P, dims: (usize, usize)) -> JointPoint {
    let (nx, ny) = dims;
    let d = nx + ny;
    let mut ledger = QueryLedger::default();
    let flat = |z: &JointPoint| DVector::from_iterator(d, z.x.iter().chain(z.y.iter()).copied());
    let origin = JointPoint::zeros(nx, ny);
    let f0 = flat(&problem.operator(&origin, &mut ledger, QueryKind::F).unwrap());
    let mut jac = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        let z = JointPoint::from_vecs(e[..nx].to_vec(), e[nx..].to_vec()).unwrap();
        let col = flat(&problem.operator(&z, &mut ledger, QueryKind::F).unwrap()) - &f0;
        jac.set_column(k, &col);
    }
    let sol = jac.lu().solve(&(-f0)).unwrap();
    JointPoint::from_vecs(sol.rows(0, nx).iter().copied().collect(), sol.rows(nx, ny).iter().copied().collect()).unwrap()
}

fn random_bilinear(seed: u64) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k: Vec<Vec<f64>> = (0..20).map(|_| (0..20).map(|_| rng.gen_range(-0.3..0.3)).collect()).collect();
    let params = QuadraticParams {
        mu: 0.5,
        nu: 0.8,
        k,
        g: vec![vec![0.0; 40]; 40],
        c: vec![0.0; 40],
    };
    let target = JointPoint::from_vecs(
        (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    quadratic_with_target(&params, &target).unwrap()
}

#[test]
fn solvers_match_linear_system_saddle_when_unconstrained() {
    for seed in 0..3 {
        let game = random_bilinear(seed);
        let center = game.initial_point();
        let sub = build_subproblem(&game, &center, 2.0, &mut QueryLedger::default()).unwrap();
        let oracle = linear_system_solution(&sub, (20, 20));
        let target = 1e-16;
        let fallback = solve_eg(&sub, &SolverConfig::new(target, 1_000_000)).unwrap();
        assert!(fallback.converged());
        assert!(fallback.point.dist_sq(&oracle).sqrt() <= target.sqrt());
        let apd = solve_apd_bilinear(&sub, target).unwrap();
        assert!(apd.point.dist_sq(&oracle).sqrt() <= target.sqrt());
    }
}

#[test]
fn primal_dual_converges_linearly() {
    for seed in 0..3 {
        let game = random_bilinear(10 + seed);
        let sub = subproblem(&game, 50.0);
        let star = game.known_ne.clone().unwrap();
        let mut trace: Vec<f64> = Vec::new();
        let mut record = |z: &JointPoint, _: &mut QueryLedger| {
            trace.push(z.dist_sq(&star).sqrt().ln());
            Ok(false)
        };
        let opts = ApdOptions { max_iter: 400, check_period: 1, certify: false };
        solve_apd_bilinear_with(&sub, &game.initial_point(), 0.0, &opts, Some(&mut record)).unwrap();
        // Above the rounding floor, past the initial transient.
        let measured = trace.iter().take_while(|v| v.is_finite() && **v > -25.0).count();
        let tail: Vec<(f64, f64)> = trace[..measured]
            .iter()
            .enumerate()
            .skip(measured / 4)
            .map(|(i, v)| (i as f64, *v))
            .collect();
        assert!(tail.len() >= 10);
        let n = tail.len() as f64;
        let (mx, my) = (tail.iter().map(|p| p.0).sum::<f64>() / n, tail.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = tail.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = tail.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let syy: f64 = tail.iter().map(|(_, y)| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r2 = sxy * sxy / (sxx * syy);
        assert!(slope < 0.0 && r2 >= 0.95, "slope {slope} r2 {r2}");
    }
}
