//! Problem families: regularized matrix games with transaction fees, their
//! convex reformulations, random sparse experiment matrices, synthetic
//! quadratic games with a planted equilibrium, and a small box-constrained
//! game whose Nash and Stackelberg points differ.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::game::{BilinearStructure, GameConstants, GameSpec, JointPoint, PayoffOracle};
use crate::sets::FeasibleSet;
use crate::vecmat::{dot, DenseVector, SparseMatrix, DEFAULT_NORM_TOL};

const NORM_MAX_ITER: usize = 200_000;

fn norm_of(m: &SparseMatrix) -> Result<f64> {
    m.spectral_norm(DEFAULT_NORM_TOL, NORM_MAX_ITER, 0)
}

/// `(M_plus, M_minus)` with `M = M_plus - M_minus`, both entrywise nonnegative.
pub fn split_pos_neg(m: &SparseMatrix) -> (SparseMatrix, SparseMatrix) {
    (
        m.map_values(|v| if v > 0.0 { v } else { 0.0 }),
        m.map_values(|v| if v < 0.0 { -v } else { 0.0 }),
    )
}

/// Post-fee payoff matrices `A = (1-rho) M+ - M-` and `B = -M+ + (1-rho) M-`.
pub fn apply_transaction_fee(m: &SparseMatrix, rho: f64) -> Result<(SparseMatrix, SparseMatrix)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("fee rate must lie in [0, 1], got {rho}")));
    }
    // v - rho*v keeps integer-valued entries exact for small decimal fees.
    let a = m.map_values(|v| if v > 0.0 { v - rho * v } else { v });
    let b = m.map_values(|v| if v < 0.0 { -(v - rho * v) } else { -v });
    Ok((a, b))
}

/// `u1 = <Ax, y> - (mu/2)|x|^2 + (nu/2)|y|^2 - pen_y |y|^2`
/// `u2 = <Bx, y> + (mu/2)|x|^2 - (nu/2)|y|^2 - pen_x |x|^2`
struct MatrixOracle {
    a: SparseMatrix,
    a_t: SparseMatrix,
    b: SparseMatrix,
    mu: f64,
    nu: f64,
    pen_x: f64,
    pen_y: f64,
}

impl MatrixOracle {
    fn sq(v: &[f64]) -> f64 {
        dot(v, v)
    }
}

impl PayoffOracle for MatrixOracle {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.a_t.spmv_into(y, &mut out);
        out.iter_mut().zip(x).for_each(|(o, xi)| *o -= self.mu * xi);
        out
    }

    fn grad_u1_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.a.spmv_into(x, &mut out);
        let c = self.nu - 2.0 * self.pen_y;
        out.iter_mut().zip(y).for_each(|(o, yi)| *o += c * yi);
        out
    }

    fn grad_u2_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.b.spmv_transpose_into(y, &mut out);
        let c = self.mu - 2.0 * self.pen_x;
        out.iter_mut().zip(x).for_each(|(o, xi)| *o += c * xi);
        out
    }

    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.b.spmv_into(x, &mut out);
        out.iter_mut().zip(y).for_each(|(o, yi)| *o -= self.nu * yi);
        out
    }

    fn u1(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let ax = self.a.spmv(x).ok()?;
        Some(
            dot(&ax, y) - 0.5 * self.mu * Self::sq(x) + (0.5 * self.nu - self.pen_y) * Self::sq(y),
        )
    }

    fn u2(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let bx = self.b.spmv(x).ok()?;
        Some(
            dot(&bx, y) + (0.5 * self.mu - self.pen_x) * Self::sq(x) - 0.5 * self.nu * Self::sq(y),
        )
    }
}

/// Regularized two-player matrix game on `simplex(n) x simplex(m)`.
///
/// `A`, `B` are `m x n`; the regularizer is `R = -(mu/2)|x|^2 + (nu/2)|y|^2`
/// added to `u1` and subtracted from `u2`.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub reg_mu: f64,
    pub reg_nu: f64,
}

/// Spectral data of a [`MatrixGame`] needed by every solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixGameNorms {
    pub norm_a: f64,
    pub norm_b: f64,
    /// `|(A - B) / 2|`
    pub zero_sum: f64,
    /// `|(A + B) / 2|`
    pub coupling: f64,
}

impl MatrixGame {
    pub fn new(a: SparseMatrix, b: SparseMatrix, reg_mu: f64, reg_nu: f64) -> Result<Self> {
        if a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "payoff matrices",
                expected: a.n_rows() * a.n_cols(),
                found: b.n_rows() * b.n_cols(),
            });
        }
        if !(reg_mu >= 0.0 && reg_nu >= 0.0 && reg_mu.is_finite() && reg_nu.is_finite()) {
            return Err(Error::InvalidParameter("regularizer curvatures must be >= 0".into()));
        }
        Ok(MatrixGame { a, b, reg_mu, reg_nu })
    }

    /// Game built from a pre-fee matrix `M` and fee rate `rho`.
    pub fn with_fee(m: &SparseMatrix, rho: f64, reg_mu: f64, reg_nu: f64) -> Result<Self> {
        let (a, b) = apply_transaction_fee(m, rho)?;
        MatrixGame::new(a, b, reg_mu, reg_nu)
    }

    pub fn dim_x(&self) -> usize {
        self.a.n_cols()
    }

    pub fn dim_y(&self) -> usize {
        self.a.n_rows()
    }

    /// `K = (A - B) / 2`
    pub fn zero_sum_matrix(&self) -> SparseMatrix {
        self.a.lincomb(0.5, &self.b, -0.5).expect("shapes checked at construction")
    }

    /// `(A + B) / 2`
    pub fn coupling_matrix(&self) -> SparseMatrix {
        self.a.lincomb(0.5, &self.b, 0.5).expect("shapes checked at construction")
    }

    pub fn norms(&self) -> Result<MatrixGameNorms> {
        Ok(MatrixGameNorms {
            norm_a: norm_of(&self.a)?,
            norm_b: norm_of(&self.b)?,
            zero_sum: norm_of(&self.zero_sum_matrix())?,
            coupling: norm_of(&self.coupling_matrix())?,
        })
    }

    /// `max(|A|, |B|) + max(mu, nu)`
    pub fn smoothness(&self, norms: &MatrixGameNorms) -> f64 {
        norms.norm_a.max(norms.norm_b) + self.reg_mu.max(self.reg_nu)
    }

    /// Smallest eigenvalue of `[[mu, -beta], [-beta, nu]]`: a strong-monotonicity
    /// modulus of `F` for `beta = |(A + B) / 2|`, continuous in `beta`.
    pub fn monotone_modulus(&self, beta: f64) -> f64 {
        let (mu, nu) = (self.reg_mu, self.reg_nu);
        0.5 * (mu + nu) - (0.25 * (mu - nu).powi(2) + beta * beta).sqrt()
    }

    fn spec(
        &self,
        norms: &MatrixGameNorms,
        pen_x: f64,
        pen_y: f64,
        constants: GameConstants,
    ) -> Result<GameSpec> {
        let oracle = MatrixOracle {
            a_t: self.a.transpose(),
            a: self.a.clone(),
            b: self.b.clone(),
            mu: self.reg_mu,
            nu: self.reg_nu,
            pen_x,
            pen_y,
        };
        let k = self.zero_sum_matrix();
        // h = -<Kx, y> + ((mu - pen_x)/2)|x|^2 - ((nu - pen_y)/2)|y|^2
        let structure = BilinearStructure::new(
            k.scaled(-1.0),
            norms.zero_sum,
            self.reg_mu - pen_x,
            self.reg_nu - pen_y,
            vec![0.0; self.dim_x()],
            vec![0.0; self.dim_y()],
        )?;
        let modulus = self.monotone_modulus(norms.coupling).max(0.0);
        GameSpec::new(
            Arc::new(oracle),
            constants,
            FeasibleSet::simplex(self.dim_x())?,
            FeasibleSet::simplex(self.dim_y())?,
        )?
        .with_structure(structure)
        .map(|g| {
            g.with_own_curvature(self.reg_mu, self.reg_nu)
                .with_monotone_modulus(modulus)
        })
    }

    /// The game as given; `delta` is `|(A + B) / 2|` and the certified
    /// monotonicity modulus is [`MatrixGame::monotone_modulus`].
    pub fn to_game(&self) -> Result<GameSpec> {
        let norms = self.norms()?;
        self.to_game_with(&norms)
    }

    pub fn to_game_with(&self, norms: &MatrixGameNorms) -> Result<GameSpec> {
        let constants = GameConstants {
            l: self.smoothness(norms),
            mu: self.reg_mu,
            nu: self.reg_nu,
            delta: norms.coupling,
        };
        self.spec(norms, 0.0, 0.0, constants)
    }
}

/// Curvature weights `(beta1, beta2)` that make the coupling part jointly
/// convex, with `beta1 <= mu/2`, `beta2 <= nu/2` and `beta1 * beta2 = beta^2`.
pub fn reformulation_weights(beta: f64, mu: f64, nu: f64) -> Result<(f64, f64)> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok((0.0, 0.0));
    }
    let budget = 0.5 * (mu * nu).sqrt();
    if beta > budget {
        return Err(Error::Precondition(format!(
            "coupling norm {beta} exceeds sqrt(mu * nu) / 2 = {budget}"
        )));
    }
    let two_beta = 2.0 * beta;
    if two_beta <= mu && two_beta <= nu {
        Ok((beta, beta))
    } else if mu <= two_beta && two_beta <= nu {
        Ok((0.5 * mu, 2.0 * beta * beta / mu))
    } else {
        // 2 beta <= sqrt(mu nu) rules out exceeding both moduli, so nu <= 2 beta <= mu.
        Ok((2.0 * beta * beta / nu, 0.5 * nu))
    }
}

/// A matrix game with extra curvature moved between the players so that the
/// coupling part becomes jointly convex while `F` is unchanged.
#[derive(Debug, Clone)]
pub struct ReformulatedGame {
    pub base: MatrixGame,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub norms: MatrixGameNorms,
}

impl ReformulatedGame {
    /// Declared constants: `delta = beta + max(beta1, beta2)`, `mu/2`, `nu/2`.
    pub fn constants(&self) -> GameConstants {
        GameConstants {
            l: self.base.smoothness(&self.norms),
            mu: 0.5 * self.base.reg_mu,
            nu: 0.5 * self.base.reg_nu,
            delta: self.beta + self.beta1.max(self.beta2),
        }
    }

    pub fn to_game(&self) -> Result<GameSpec> {
        self.base
            .spec(&self.norms, self.beta1, self.beta2, self.constants())
    }
}

/// Reformulates with `beta = |(A + B) / 2|` computed by power iteration.
pub fn reformulate_bilinear(game: &MatrixGame) -> Result<ReformulatedGame> {
    let norms = game.norms()?;
    reformulate_bilinear_with(game, norms.coupling, norms)
}

/// Reformulates with a caller-supplied coupling norm `beta`.
pub fn reformulate_bilinear_with(
    game: &MatrixGame,
    beta: f64,
    norms: MatrixGameNorms,
) -> Result<ReformulatedGame> {
    let (beta1, beta2) = reformulation_weights(beta, game.reg_mu, game.reg_nu)?;
    Ok(ReformulatedGame {
        base: game.clone(),
        beta,
        beta1,
        beta2,
        norms,
    })
}

/// `u1 - beta |y|^2`, `u2 - beta |x|^2` on top of an arbitrary oracle.
struct ShiftedOracle {
    inner: Arc<dyn PayoffOracle>,
    beta: f64,
}

impl PayoffOracle for ShiftedOracle {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.inner.grad_u1_x(x, y)
    }

    fn grad_u1_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u1_y(x, y);
        g.iter_mut().zip(y).for_each(|(gi, yi)| *gi -= 2.0 * self.beta * yi);
        g
    }

    fn grad_u2_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u2_x(x, y);
        g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= 2.0 * self.beta * xi);
        g
    }

    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.inner.grad_u2_y(x, y)
    }

    fn u1(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.inner.u1(x, y)? - self.beta * dot(y, y))
    }

    fn u2(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.inner.u2(x, y)? - self.beta * dot(x, x))
    }
}

/// Adds `(beta/2)|z|^2` to the coupling part and moves it out of the
/// zero-sum part. Requires `delta <= beta <= min(mu, nu) / 2`.
pub fn reformulate_general(game: &GameSpec, beta: f64) -> Result<GameSpec> {
    let c = game.constants;
    if !(beta >= c.delta && beta <= 0.5 * c.mu.min(c.nu)) {
        return Err(Error::Precondition(format!(
            "need delta <= beta <= min(mu, nu)/2 (delta = {}, beta = {beta}, mu = {}, nu = {})",
            c.delta, c.mu, c.nu
        )));
    }
    let oracle = Arc::new(ShiftedOracle {
        inner: game.oracle().clone(),
        beta,
    });
    let constants = GameConstants {
        l: c.l + 2.0 * beta,
        mu: 0.5 * c.mu,
        nu: 0.5 * c.nu,
        delta: 2.0 * beta,
    };
    let mut out = GameSpec::new(oracle, constants, game.x_set.clone(), game.y_set.clone())?
        .with_monotone_modulus(game.monotone_modulus);
    if let Some(z) = &game.known_ne {
        out = out.with_known_ne(z.clone())?;
    }
    if let Some(s) = &game.structure {
        let s = BilinearStructure::new(
            s.coupling().clone(),
            s.coupling_norm(),
            s.curv_x - beta,
            s.curv_y - beta,
            s.lin_x.clone(),
            s.lin_y.clone(),
        )?;
        out = out.with_structure(s)?;
    }
    if let Some((c1, c2)) = game.own_curvature {
        out = out.with_own_curvature(c1, c2);
    }
    Ok(out)
}

/// A random sparse payoff matrix plus the parameters it was drawn with.
#[derive(Debug, Clone)]
pub struct SparseExperiment {
    /// Pre-fee payoff matrix, `m x n`.
    pub matrix: SparseMatrix,
    pub n: usize,
    pub m: usize,
    pub nnz: usize,
    pub seed: u64,
    pub mu: f64,
    pub nu: f64,
    /// Spectral norm before normalization.
    pub raw_norm: f64,
}

impl SparseExperiment {
    pub fn game(&self, rho: f64) -> Result<MatrixGame> {
        MatrixGame::with_fee(&self.matrix, rho, self.mu, self.nu)
    }
}

/// Draws `nnz` distinct positions of an `m x n` matrix uniformly (partial
/// Fisher-Yates over the virtual index range) with values uniform on `[-1, 1]`.
pub fn gen_sparse_experiment(
    n: usize,
    m: usize,
    nnz: usize,
    seed: u64,
    mu: f64,
    nu: f64,
    normalize: bool,
) -> Result<SparseExperiment> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    let total = n.checked_mul(m).ok_or_else(|| Error::InvalidParameter("n * m overflows".into()))?;
    if nnz > total {
        return Err(Error::InvalidParameter(format!(
            "nnz = {nnz} exceeds n * m = {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * nnz);
    let mut triplets = Vec::with_capacity(nnz);
    for i in 0..nnz {
        let j = rng.gen_range(i..total);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        let v: f64 = rng.gen_range(-1.0..=1.0);
        triplets.push((at_j / n, at_j % n, v));
    }
    let mut matrix = SparseMatrix::from_triplets(m, n, &triplets)?;
    let raw_norm = if matrix.nnz() > 0 { norm_of(&matrix)? } else { 0.0 };
    if normalize && raw_norm > 0.0 {
        matrix = matrix.scaled(1.0 / raw_norm);
    }
    Ok(SparseExperiment {
        matrix,
        n,
        m,
        nnz,
        seed,
        mu,
        nu,
        raw_norm,
    })
}

/// `u1 = -g - h`, `u2 = -g + h` with
/// `h = (mu/2)|x|^2 - (nu/2)|y|^2 + <Kx, y> + <p, x> + <q, y>` and
/// `g = z^T G z / 2 + <c, z>`.
struct QuadraticOracle {
    n_x: usize,
    mu: f64,
    nu: f64,
    k: DMatrix<f64>,
    p: DVector<f64>,
    q: DVector<f64>,
    g: DMatrix<f64>,
    c: DVector<f64>,
}

impl QuadraticOracle {
    /// `(grad g, grad_x h, grad_y h)`
    fn parts(&self, x: &[f64], y: &[f64]) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let xv = DVector::from_column_slice(x);
        let yv = DVector::from_column_slice(y);
        let z = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y).copied());
        let gg = &self.g * &z + &self.c;
        let hx = &xv * self.mu + self.k.tr_mul(&yv) + &self.p;
        let hy = &yv * (-self.nu) + &self.k * &xv + &self.q;
        (gg, hx, hy)
    }

    fn values(&self, x: &[f64], y: &[f64]) -> (f64, f64) {
        let xv = DVector::from_column_slice(x);
        let yv = DVector::from_column_slice(y);
        let z = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y).copied());
        let g = 0.5 * z.dot(&(&self.g * &z)) + self.c.dot(&z);
        let h = 0.5 * self.mu * xv.norm_squared() - 0.5 * self.nu * yv.norm_squared()
            + yv.dot(&(&self.k * &xv))
            + self.p.dot(&xv)
            + self.q.dot(&yv);
        (g, h)
    }
}

impl PayoffOracle for QuadraticOracle {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (gg, hx, _) = self.parts(x, y);
        (0..x.len()).map(|i| -gg[i] - hx[i]).collect()
    }

    fn grad_u1_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (gg, _, hy) = self.parts(x, y);
        (0..y.len()).map(|j| -gg[self.n_x + j] - hy[j]).collect()
    }

    fn grad_u2_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (gg, hx, _) = self.parts(x, y);
        (0..x.len()).map(|i| -gg[i] + hx[i]).collect()
    }

    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let (gg, _, hy) = self.parts(x, y);
        (0..y.len()).map(|j| -gg[self.n_x + j] + hy[j]).collect()
    }

    fn u1(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let (g, h) = self.values(x, y);
        Some(-g - h)
    }

    fn u2(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let (g, h) = self.values(x, y);
        Some(-g + h)
    }
}

fn dense_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Parameters of a synthetic quadratic game with a planted equilibrium.
#[derive(Debug, Clone)]
pub struct QuadraticParams {
    pub mu: f64,
    pub nu: f64,
    /// `n_y x n_x`, row-major.
    pub k: Vec<Vec<f64>>,
    /// Symmetric positive semidefinite, `(n_x + n_y)` square, row-major.
    pub g: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

/// Builds the quadratic game whose unique equilibrium is `target`: the linear
/// terms of the zero-sum part are solved for so that `F(target) = 0`, and the
/// feasible sets are balls about the origin of radius `max(10 |target part|, 1)`.
pub fn quadratic_with_target(params: &QuadraticParams, target: &JointPoint) -> Result<GameSpec> {
    let (n_x, n_y) = target.dims();
    let d = n_x + n_y;
    if params.k.len() != n_y || params.k.iter().any(|r| r.len() != n_x) {
        return Err(Error::DimensionMismatch {
            context: "quadratic K",
            expected: n_x * n_y,
            found: params.k.iter().map(Vec::len).sum(),
        });
    }
    if params.g.len() != d || params.g.iter().any(|r| r.len() != d) || params.c.len() != d {
        return Err(Error::DimensionMismatch {
            context: "quadratic G",
            expected: d * d,
            found: params.g.iter().map(Vec::len).sum(),
        });
    }
    if !(params.mu >= 0.0 && params.nu >= 0.0) {
        return Err(Error::InvalidParameter("moduli must be >= 0".into()));
    }
    let k = DMatrix::from_fn(n_y, n_x, |i, j| params.k[i][j]);
    let g = DMatrix::from_fn(d, d, |i, j| params.g[i][j]);
    let sym_err = (&g - g.transpose()).abs().max();
    let min_eig = if d > 0 { g.clone().symmetric_eigenvalues().min() } else { 0.0 };
    if sym_err > 1e-12 || min_eig < -1e-12 {
        return Err(Error::InvalidParameter("G must be symmetric positive semidefinite".into()));
    }
    let c = DVector::from_column_slice(&params.c);
    let xs = DVector::from_column_slice(&target.x);
    let ys = DVector::from_column_slice(&target.y);
    let zs = DVector::from_iterator(d, target.x.iter().chain(target.y.iter()).copied());
    let gz = &g * &zs + &c;
    let gz_x = gz.rows(0, n_x).into_owned();
    let gz_y = gz.rows(n_x, n_y).into_owned();
    let p = -(gz_x + &xs * params.mu + k.tr_mul(&ys));
    let q = gz_y + &ys * params.nu - &k * &xs;

    // Hessian of h in z (symmetric block form) and of the utilities.
    let mut hess_h = DMatrix::zeros(d, d);
    for i in 0..n_x {
        hess_h[(i, i)] = params.mu;
    }
    for j in 0..n_y {
        hess_h[(n_x + j, n_x + j)] = -params.nu;
    }
    hess_h.view_mut((n_x, 0), (n_y, n_x)).copy_from(&k);
    hess_h.view_mut((0, n_x), (n_x, n_y)).copy_from(&k.transpose());
    // Jacobian of H: the x-rows of hess_h and the negated y-rows.
    let mut jac_h = hess_h.clone();
    jac_h.view_mut((n_x, 0), (n_y, d)).neg_mut();
    let l = dense_norm(&(-&g - &hess_h))
        .max(dense_norm(&(-&g + &hess_h)))
        .max(dense_norm(&(&g + &jac_h)))
        .max(dense_norm(&jac_h))
        .max(params.mu)
        .max(params.nu);
    let delta = dense_norm(&g);
    let l = if l > 0.0 { l } else { 1.0 };

    let x_radius = (10.0 * target.x.norm()).max(1.0);
    let y_radius = (10.0 * target.y.norm()).max(1.0);
    let x_set = FeasibleSet::ball(vec![0.0; n_x], x_radius)?;
    let y_set = FeasibleSet::ball(vec![0.0; n_y], y_radius)?;

    let k_sparse = SparseMatrix::from_dense(&params.k)?;
    let structure = BilinearStructure::new(
        k_sparse,
        dense_norm(&k),
        params.mu,
        params.nu,
        p.iter().copied().collect(),
        q.iter().copied().collect(),
    )?;
    let oracle = QuadraticOracle {
        n_x,
        mu: params.mu,
        nu: params.nu,
        k,
        p,
        q,
        g,
        c,
    };
    let constants = GameConstants {
        l,
        mu: params.mu,
        nu: params.nu,
        delta,
    };
    GameSpec::new(Arc::new(oracle), constants, x_set, y_set)?
        .with_structure(structure)?
        .with_known_ne(target.clone())
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random quadratic game with `|G| = delta`, `|K| = coupling_norm` and a
/// planted equilibrium drawn uniformly from `[-1, 1]^(n_x + n_y)`.
pub fn gen_quadratic_known_ne(
    n_x: usize,
    n_y: usize,
    mu: f64,
    nu: f64,
    delta: f64,
    coupling_norm: f64,
    seed: u64,
) -> Result<GameSpec> {
    if n_x == 0 || n_y == 0 {
        return Err(Error::InvalidParameter("dimensions must be positive".into()));
    }
    if !(delta >= 0.0 && coupling_norm >= 0.0) {
        return Err(Error::InvalidParameter("delta and coupling norm must be >= 0".into()));
    }
    let d = n_x + n_y;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = gaussian_matrix(&mut rng, n_y, n_x);
    let kn = dense_norm(&k);
    k *= if kn > 0.0 { coupling_norm / kn } else { 0.0 };
    let w = gaussian_matrix(&mut rng, d, d);
    let mut g = &w * w.transpose();
    let gn = dense_norm(&g);
    g *= if gn > 0.0 { delta / gn } else { 0.0 };
    g = (&g + g.transpose()) * 0.5;
    let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let target = JointPoint::new(
        DenseVector::new((0..n_x).map(|_| rng.gen_range(-1.0..=1.0)).collect())?,
        DenseVector::new((0..n_y).map(|_| rng.gen_range(-1.0..=1.0)).collect())?,
    );
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    };
    let params = QuadraticParams {
        mu,
        nu,
        k: rows(&k),
        g: rows(&g),
        c,
    };
    quadratic_with_target(&params, &target)
}

/// `u1 = -(x1-1)^2/2 - (x2-1)^2/2 + x1 y / 2`, `u2 = x2 y / 2 - (y+1)^2`.
struct StackelbergOracle;

impl PayoffOracle for StackelbergOracle {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![-(x[0] - 1.0) + 0.5 * y[0], -(x[1] - 1.0)]
    }

    fn grad_u1_y(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.5 * x[0]]
    }

    fn grad_u2_x(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![0.0, 0.5 * y[0]]
    }

    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        vec![0.5 * x[1] - 2.0 * (y[0] + 1.0)]
    }

    fn u1(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(-0.5 * (x[0] - 1.0).powi(2) - 0.5 * (x[1] - 1.0).powi(2) + 0.5 * x[0] * y[0])
    }

    fn u2(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(0.5 * x[1] * y[0] - (y[0] + 1.0).powi(2))
    }
}

/// Nash point of [`stackelberg_example`].
pub const STACKELBERG_NASH: [f64; 3] = [5.0 / 8.0, 1.0, -3.0 / 4.0];
/// Leader-follower optimum of [`stackelberg_example`] with `x` leading.
pub const STACKELBERG_LEADER: [f64; 3] = [40.0 / 63.0, 68.0 / 63.0, -46.0 / 63.0];

/// Box game on `X = [0,1] x [1,2]`, `Y = [-1, 0]` whose best-response
/// dynamics reach a leader-follower point instead of the Nash point.
pub fn stackelberg_example() -> GameSpec {
    // h = (1/4)|x|^2 - (1/2)y^2 + (-x1/4 + x2/4) y - x1/2 - x2/2 - y + const
    let coupling = SparseMatrix::from_dense(&[vec![-0.25, 0.25]]).expect("static matrix");
    let structure = BilinearStructure::new(
        coupling,
        std::f64::consts::FRAC_1_SQRT_2 / 2.0,
        0.5,
        1.0,
        vec![-0.5, -0.5],
        vec![-1.0],
    )
    .expect("static structure");
    // Jacobian of F = -(grad_x u1, grad_y u2); its norm exceeds that of
    // either utility Hessian, so it sets the smoothness constant.
    let jac_f = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -0.5, 0.0, 1.0, 0.0, 0.0, -0.5, 2.0]);
    let constants = GameConstants {
        l: dense_norm(&jac_f).max(1.0 + 5f64.sqrt() / 2.0),
        mu: 0.5,
        nu: 1.0,
        // Largest eigenvalue of the Hessian of g.
        delta: (3.0 + 3f64.sqrt()) / 4.0,
    };
    let x_set = FeasibleSet::boxed(vec![0.0, 1.0], vec![1.0, 2.0]).expect("static box");
    let y_set = FeasibleSet::boxed(vec![-1.0], vec![0.0]).expect("static box");
    let nash = JointPoint::new(
        DenseVector::from_raw(STACKELBERG_NASH[..2].to_vec()),
        DenseVector::from_raw(vec![STACKELBERG_NASH[2]]),
    );
    GameSpec::new(Arc::new(StackelbergOracle), constants, x_set, y_set)
        .and_then(|g| g.with_structure(structure))
        .and_then(|g| g.with_known_ne(nash))
        .expect("static instance")
        .with_own_curvature(1.0, 2.0)
}

/// Matching pennies `M = [[1, -1], [-1, 1]]` as a zero-sum game with
/// regularizer curvatures `mu`, `nu`.
pub fn matching_pennies(mu: f64, nu: f64) -> Result<MatrixGame> {
    let m = SparseMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]])?;
    MatrixGame::with_fee(&m, 0.0, mu, nu)
}
