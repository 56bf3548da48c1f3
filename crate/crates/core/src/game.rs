//! Game specifications and the coupling / zero-sum decomposition.
//!
//! A game is given by the four partial gradients of the utilities `u1` (player
//! one, maximizing over `x`) and `u2` (player two, maximizing over `y`).
//! Everything else is derived from them:
//!
//! ```text
//! g = -(u1 + u2) / 2          coupling part
//! h = (-u1 + u2) / 2          zero-sum part
//! H = (grad_x h, -grad_y h)
//! F = -(grad_x u1, grad_y u2) = grad g + H
//! ```

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::sets::FeasibleSet;
use crate::vecmat::{dist_sq, dot, DenseVector, SparseMatrix};

/// Slack used when checking that a point lies in `X x Y`.
pub const POINT_SLACK: f64 = 1e-10;

/// A pair `(x, y)` in `X x Y`; also used for operator values of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    pub x: DenseVector,
    pub y: DenseVector,
}

impl JointPoint {
    pub fn new(x: DenseVector, y: DenseVector) -> Self {
        JointPoint { x, y }
    }

    pub fn from_vecs(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Ok(JointPoint {
            x: DenseVector::new(x)?,
            y: DenseVector::new(y)?,
        })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        JointPoint::new(DenseVector::zeros(nx), DenseVector::zeros(ny))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    /// `<z', z> = <x', x> + <y', y>`
    pub fn dot(&self, other: &JointPoint) -> f64 {
        dot(&self.x, &other.x) + dot(&self.y, &other.y)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &JointPoint) -> f64 {
        dist_sq(&self.x, &other.x) + dist_sq(&self.y, &other.y)
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &JointPoint) -> JointPoint {
        JointPoint::new(self.x.add_scaled(s, &other.x), self.y.add_scaled(s, &other.y))
    }

    pub fn sub(&self, other: &JointPoint) -> JointPoint {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, s: f64) -> JointPoint {
        JointPoint::new(self.x.scaled(s), self.y.scaled(s))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn max_abs_diff(&self, other: &JointPoint) -> f64 {
        self.x
            .iter()
            .zip(other.x.iter())
            .chain(self.y.iter().zip(other.y.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Which counter an operator evaluation is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    /// Full-game operator `F` (whole-problem methods).
    F,
    /// Zero-sum part: `H`, or the saddle operator of an inner subproblem.
    H,
    /// Coupling gradient `grad g`.
    G,
    /// Evaluations spent only on stopping certificates and inexactness checks.
    Cert,
}

/// Gradient-query counts of one solver run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryLedger {
    pub f_queries: u64,
    pub h_queries: u64,
    pub g_queries: u64,
    pub cert_queries: u64,
}

impl QueryLedger {
    pub fn record(&mut self, kind: QueryKind, n: u64) {
        match kind {
            QueryKind::F => self.f_queries += n,
            QueryKind::H => self.h_queries += n,
            QueryKind::G => self.g_queries += n,
            QueryKind::Cert => self.cert_queries += n,
        }
    }

    pub fn get(&self, kind: QueryKind) -> u64 {
        match kind {
            QueryKind::F => self.f_queries,
            QueryKind::H => self.h_queries,
            QueryKind::G => self.g_queries,
            QueryKind::Cert => self.cert_queries,
        }
    }

    /// Queries spent by the algorithm itself, certification excluded.
    pub fn algorithmic(&self) -> u64 {
        self.f_queries + self.h_queries + self.g_queries
    }

    pub fn total(&self) -> u64 {
        self.algorithmic() + self.cert_queries
    }

    pub fn merge(&mut self, other: &QueryLedger) {
        self.f_queries += other.f_queries;
        self.h_queries += other.h_queries;
        self.g_queries += other.g_queries;
        self.cert_queries += other.cert_queries;
    }
}

/// The four partial gradients of the utilities, plus optional values.
///
/// Implementations must be pure: the same input always yields the same output.
pub trait PayoffOracle: Send + Sync {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_u1_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_u2_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;

    fn u1(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    fn u2(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }
}

/// Exact description of a zero-sum part of the form
///
/// ```text
/// h(x, y) = <C x, y> + (a/2)|x|^2 - (b/2)|y|^2 + <p, x> + <q, y> + const
/// ```
///
/// with `C` sparse. Solvers that exploit bilinear coupling read it from here.
#[derive(Debug, Clone)]
pub struct BilinearStructure {
    coupling: SparseMatrix,
    coupling_t: SparseMatrix,
    coupling_norm: f64,
    pub curv_x: f64,
    pub curv_y: f64,
    pub lin_x: Vec<f64>,
    pub lin_y: Vec<f64>,
}

impl BilinearStructure {
    /// `coupling` is `dim_y x dim_x`. `coupling_norm` must bound `|C|`.
    pub fn new(
        coupling: SparseMatrix,
        coupling_norm: f64,
        curv_x: f64,
        curv_y: f64,
        lin_x: Vec<f64>,
        lin_y: Vec<f64>,
    ) -> Result<Self> {
        check_dim("structure lin_x", coupling.n_cols(), lin_x.len())?;
        check_dim("structure lin_y", coupling.n_rows(), lin_y.len())?;
        if curv_x < 0.0 || curv_y < 0.0 || coupling_norm < 0.0 {
            return Err(Error::InvalidParameter(
                "structure curvatures and coupling norm must be nonnegative".into(),
            ));
        }
        let coupling_t = coupling.transpose();
        Ok(BilinearStructure {
            coupling,
            coupling_t,
            coupling_norm,
            curv_x,
            curv_y,
            lin_x,
            lin_y,
        })
    }

    pub fn coupling(&self) -> &SparseMatrix {
        &self.coupling
    }

    pub fn coupling_norm(&self) -> f64 {
        self.coupling_norm
    }

    /// `out = C x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.coupling.spmv_into(x, out);
    }

    /// `out = C^T y`, gathered row by row from the cached transpose.
    pub fn apply_t(&self, y: &[f64], out: &mut [f64]) {
        self.coupling_t.spmv_into(y, out);
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_t(y, &mut out);
        for ((o, xi), p) in out.iter_mut().zip(x).zip(&self.lin_x) {
            *o += self.curv_x * xi + p;
        }
        out
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.apply(x, &mut out);
        for ((o, yi), q) in out.iter_mut().zip(y).zip(&self.lin_y) {
            *o += -self.curv_y * yi + q;
        }
        out
    }
}

/// Smoothness and modulus constants of a game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    /// Smoothness of both utilities.
    pub l: f64,
    /// Strong convexity of `h` in `x`.
    pub mu: f64,
    /// Strong concavity of `h` in `y`.
    pub nu: f64,
    /// Smoothness of the coupling part `g`.
    pub delta: f64,
}

/// A two-player game on `X x Y` with its constants and optional extras.
#[derive(Clone)]
pub struct GameSpec {
    oracle: Arc<dyn PayoffOracle>,
    pub constants: GameConstants,
    /// Certified strong-monotonicity modulus of `F`; defaults to `min(mu, nu)`.
    pub monotone_modulus: f64,
    pub x_set: FeasibleSet,
    pub y_set: FeasibleSet,
    pub known_ne: Option<JointPoint>,
    pub structure: Option<Arc<BilinearStructure>>,
    /// `(c1, c2)` when `u1(., y)` is `-(c1/2)|x|^2 + linear` and `u2(x, .)` is
    /// `-(c2/2)|y|^2 + linear`; enables exact best responses.
    pub own_curvature: Option<(f64, f64)>,
    cross_check: bool,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("constants", &self.constants)
            .field("monotone_modulus", &self.monotone_modulus)
            .field("dim_x", &self.x_set.dimension())
            .field("dim_y", &self.y_set.dimension())
            .field("known_ne", &self.known_ne.is_some())
            .field("structure", &self.structure.is_some())
            .finish()
    }
}

impl GameSpec {
    pub fn new(
        oracle: Arc<dyn PayoffOracle>,
        constants: GameConstants,
        x_set: FeasibleSet,
        y_set: FeasibleSet,
    ) -> Result<Self> {
        let GameConstants { l, mu, nu, delta } = constants;
        let ok = |v: f64| v.is_finite() && v >= 0.0 && v <= l;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!("L must be positive, got {l}")));
        }
        if !ok(mu) || !ok(nu) {
            return Err(Error::InvalidParameter(format!(
                "moduli must satisfy 0 <= mu, nu <= L (mu = {mu}, nu = {nu}, L = {l})"
            )));
        }
        if !ok(delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, L] (delta = {delta}, L = {l})"
            )));
        }
        Ok(GameSpec {
            oracle,
            constants,
            monotone_modulus: mu.min(nu),
            x_set,
            y_set,
            known_ne: None,
            structure: None,
            own_curvature: None,
            cross_check: false,
        })
    }

    pub fn with_known_ne(mut self, z: JointPoint) -> Result<Self> {
        if !self.is_feasible(&z) {
            return Err(Error::InvalidParameter("known equilibrium is not feasible".into()));
        }
        self.known_ne = Some(z);
        Ok(self)
    }

    pub fn with_structure(mut self, s: BilinearStructure) -> Result<Self> {
        check_dim("structure x", self.dim_x(), s.lin_x.len())?;
        check_dim("structure y", self.dim_y(), s.lin_y.len())?;
        self.structure = Some(Arc::new(s));
        Ok(self)
    }

    pub fn with_own_curvature(mut self, c1: f64, c2: f64) -> Self {
        self.own_curvature = Some((c1, c2));
        self
    }

    pub fn with_monotone_modulus(mut self, m: f64) -> Self {
        self.monotone_modulus = m;
        self
    }

    /// When enabled every `operator_f` call also evaluates `grad g + H` and
    /// fails if the two disagree beyond `1e-12` (scaled by the operator size).
    pub fn with_cross_check(mut self, on: bool) -> Self {
        self.cross_check = on;
        self
    }

    pub fn oracle(&self) -> &Arc<dyn PayoffOracle> {
        &self.oracle
    }

    pub fn dim_x(&self) -> usize {
        self.x_set.dimension()
    }

    pub fn dim_y(&self) -> usize {
        self.y_set.dimension()
    }

    pub fn l(&self) -> f64 {
        self.constants.l
    }

    pub fn mu(&self) -> f64 {
        self.constants.mu
    }

    pub fn nu(&self) -> f64 {
        self.constants.nu
    }

    pub fn delta(&self) -> f64 {
        self.constants.delta
    }

    pub fn min_modulus(&self) -> f64 {
        self.constants.mu.min(self.constants.nu)
    }

    pub fn diameter_x(&self) -> f64 {
        self.x_set.diameter()
    }

    pub fn diameter_y(&self) -> f64 {
        self.y_set.diameter()
    }

    /// `D^2 = D_X^2 + D_Y^2`
    pub fn diameter_sq(&self) -> f64 {
        self.diameter_x().powi(2) + self.diameter_y().powi(2)
    }

    pub fn is_feasible(&self, z: &JointPoint) -> bool {
        self.x_set.contains(&z.x, POINT_SLACK) && self.y_set.contains(&z.y, POINT_SLACK)
    }

    pub fn project(&self, z: &JointPoint) -> JointPoint {
        let mut x = vec![0.0; z.x.len()];
        let mut y = vec![0.0; z.y.len()];
        self.x_set.project_into(&z.x, &mut x);
        self.y_set.project_into(&z.y, &mut y);
        JointPoint::new(DenseVector::from_raw(x), DenseVector::from_raw(y))
    }

    /// `(1_n / n, 1_m / m)` on simplices; the set centers in general.
    pub fn initial_point(&self) -> JointPoint {
        JointPoint::new(self.x_set.center(), self.y_set.center())
    }

    fn check_point(&self, z: &JointPoint) -> Result<()> {
        check_dim("point x", self.dim_x(), z.x.len())?;
        check_dim("point y", self.dim_y(), z.y.len())
    }

    fn finite(v: Vec<f64>) -> Result<DenseVector> {
        DenseVector::new(v)
    }

    /// Raw partial gradients `(grad_x u1, grad_y u1, grad_x u2, grad_y u2)`.
    pub fn utility_gradients(&self, z: &JointPoint) -> Result<[DenseVector; 4]> {
        self.check_point(z)?;
        let o = &self.oracle;
        Ok([
            Self::finite(o.grad_u1_x(&z.x, &z.y))?,
            Self::finite(o.grad_u1_y(&z.x, &z.y))?,
            Self::finite(o.grad_u2_x(&z.x, &z.y))?,
            Self::finite(o.grad_u2_y(&z.x, &z.y))?,
        ])
    }

    /// `grad g = (-(grad_x u1 + grad_x u2) / 2, -(grad_y u1 + grad_y u2) / 2)`
    pub fn grad_g(&self, z: &JointPoint, ledger: &mut QueryLedger) -> Result<JointPoint> {
        let [u1x, u1y, u2x, u2y] = self.utility_gradients(z)?;
        ledger.record(QueryKind::G, 1);
        Ok(JointPoint::new(
            DenseVector::from_raw(u1x.iter().zip(u2x.iter()).map(|(a, b)| -0.5 * (a + b)).collect()),
            DenseVector::from_raw(u1y.iter().zip(u2y.iter()).map(|(a, b)| -0.5 * (a + b)).collect()),
        ))
    }

    /// `H = (grad_x h, -grad_y h)` with `h = (-u1 + u2) / 2`.
    pub fn operator_h(&self, z: &JointPoint, ledger: &mut QueryLedger) -> Result<JointPoint> {
        ledger.record(QueryKind::H, 1);
        self.eval_h(z)
    }

    pub(crate) fn eval_h(&self, z: &JointPoint) -> Result<JointPoint> {
        let [u1x, u1y, u2x, u2y] = self.utility_gradients(z)?;
        Ok(JointPoint::new(
            DenseVector::from_raw(u1x.iter().zip(u2x.iter()).map(|(a, b)| 0.5 * (-a + b)).collect()),
            DenseVector::from_raw(u1y.iter().zip(u2y.iter()).map(|(a, b)| -0.5 * (-a + b)).collect()),
        ))
    }

    /// `F = -(grad_x u1, grad_y u2)`, charged to `kind`.
    pub fn operator_f_as(
        &self,
        z: &JointPoint,
        ledger: &mut QueryLedger,
        kind: QueryKind,
    ) -> Result<JointPoint> {
        ledger.record(kind, 1);
        self.eval_f(z)
    }

    pub fn operator_f(&self, z: &JointPoint, ledger: &mut QueryLedger) -> Result<JointPoint> {
        self.operator_f_as(z, ledger, QueryKind::F)
    }

    pub(crate) fn eval_f(&self, z: &JointPoint) -> Result<JointPoint> {
        self.check_point(z)?;
        let o = &self.oracle;
        let mut gx = o.grad_u1_x(&z.x, &z.y);
        let mut gy = o.grad_u2_y(&z.x, &z.y);
        gx.iter_mut().for_each(|v| *v = -*v);
        gy.iter_mut().for_each(|v| *v = -*v);
        let f = JointPoint::new(Self::finite(gx)?, Self::finite(gy)?);
        if self.cross_check {
            let mut scratch = QueryLedger::default();
            let sum = {
                let g = self.grad_g(z, &mut scratch)?;
                let h = self.eval_h(z)?;
                g.add_scaled(1.0, &h)
            };
            let scale = 1.0 + f.norm();
            let diff = f.max_abs_diff(&sum);
            if diff > 1e-12 * scale {
                return Err(Error::Precondition(format!(
                    "F and grad g + H disagree by {diff:e}"
                )));
            }
        }
        Ok(f)
    }

    pub fn u1(&self, z: &JointPoint) -> Result<f64> {
        self.oracle.u1(&z.x, &z.y).ok_or(Error::MissingValueOracle("u1"))
    }

    pub fn u2(&self, z: &JointPoint) -> Result<f64> {
        self.oracle.u2(&z.x, &z.y).ok_or(Error::MissingValueOracle("u2"))
    }

    /// `g = -(u1 + u2) / 2`
    pub fn g_value(&self, z: &JointPoint) -> Result<f64> {
        Ok(-0.5 * (self.u1(z)? + self.u2(z)?))
    }

    /// `h = (-u1 + u2) / 2`
    pub fn h_value(&self, z: &JointPoint) -> Result<f64> {
        Ok(0.5 * (-self.u1(z)? + self.u2(z)?))
    }

    pub fn has_values(&self) -> bool {
        let z = self.initial_point();
        self.oracle.u1(&z.x, &z.y).is_some() && self.oracle.u2(&z.x, &z.y).is_some()
    }
}

/// Empirical secant statistics from [`probe_structure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    /// `min <F(z') - F(z), z' - z> / |z' - z|^2`
    pub monotonicity: f64,
    /// Same quantity for `grad g`; nonnegative when `g` is jointly convex.
    pub coupling_convexity: f64,
    /// `max |grad g(z') - grad g(z)| / |z' - z|`, a lower bound on `delta`.
    pub coupling_lipschitz: f64,
    pub pairs: usize,
}

/// Samples feasible pairs and reports secant estimates of the structural constants.
pub fn probe_structure(game: &GameSpec, n_pairs: usize, seed: u64) -> Result<StructureReport> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("n_pairs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = QueryLedger::default();
    let mut report = StructureReport {
        monotonicity: f64::INFINITY,
        coupling_convexity: f64::INFINITY,
        coupling_lipschitz: 0.0,
        pairs: n_pairs,
    };
    let mut done = 0;
    while done < n_pairs {
        let z = JointPoint::new(game.x_set.sample(&mut rng), game.y_set.sample(&mut rng));
        let w = JointPoint::new(game.x_set.sample(&mut rng), game.y_set.sample(&mut rng));
        let d = w.sub(&z);
        let dn = d.norm_sq();
        if dn <= 1e-24 {
            continue;
        }
        let fz = game.eval_f(&z)?;
        let fw = game.eval_f(&w)?;
        let gz = game.grad_g(&z, &mut scratch)?;
        let gw = game.grad_g(&w, &mut scratch)?;
        let df = fw.sub(&fz);
        let dg = gw.sub(&gz);
        report.monotonicity = report.monotonicity.min(df.dot(&d) / dn);
        report.coupling_convexity = report.coupling_convexity.min(dg.dot(&d) / dn);
        report.coupling_lipschitz = report.coupling_lipschitz.max((dg.norm_sq() / dn).sqrt());
        done += 1;
    }
    Ok(report)
}
