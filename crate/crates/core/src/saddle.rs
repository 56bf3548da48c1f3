//! Whole-problem baselines (extragradient, optimistic gradient), the
//! primal-dual inner solver for bilinear subproblems, and the distance
//! certificate used as a stopping rule.

use crate::error::{Error, Result};
use crate::game::{GameSpec, JointPoint, QueryKind, QueryLedger};
use crate::icl::SaddleSubproblem;
use crate::vecmat::DenseVector;

/// Per-iteration shrink of the backtracked smoothness estimate.
const BACKTRACK_DECAY: f64 = 0.9;

/// Default number of iterations between certificate evaluations.
pub const DEFAULT_CERTIFICATE_PERIOD: usize = 8;

/// A strongly monotone variational inequality over a product of compact sets.
pub trait VariationalProblem {
    /// Evaluates the operator, charging one query of `kind`.
    fn operator(&self, z: &JointPoint, ledger: &mut QueryLedger, kind: QueryKind)
        -> Result<JointPoint>;
    fn project(&self, z: &JointPoint) -> JointPoint;
    /// Lipschitz constant of the operator.
    fn lipschitz(&self) -> f64;
    /// Strong-monotonicity modulus of the operator.
    fn modulus(&self) -> f64;
    /// Counter charged by solver iterations.
    fn query_kind(&self) -> QueryKind;
    fn start(&self) -> JointPoint;
}

impl VariationalProblem for GameSpec {
    fn operator(
        &self,
        z: &JointPoint,
        ledger: &mut QueryLedger,
        kind: QueryKind,
    ) -> Result<JointPoint> {
        self.operator_f_as(z, ledger, kind)
    }

    fn project(&self, z: &JointPoint) -> JointPoint {
        GameSpec::project(self, z)
    }

    fn lipschitz(&self) -> f64 {
        self.l()
    }

    fn modulus(&self) -> f64 {
        self.monotone_modulus
    }

    fn query_kind(&self) -> QueryKind {
        QueryKind::F
    }

    fn start(&self) -> JointPoint {
        self.initial_point()
    }
}

/// Called at every certificate check with the current iterate; returning
/// `true` stops the solve as converged.
pub type SolveMonitor<'m> = &'m mut dyn FnMut(&JointPoint, &mut QueryLedger) -> Result<bool>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Step size; `None` selects the method default.
    pub gamma: Option<f64>,
    /// Target squared distance to the solution.
    pub epsilon: f64,
    pub max_iter: usize,
    pub certificate_period: usize,
}

impl SolverConfig {
    pub fn new(epsilon: f64, max_iter: usize) -> Self {
        SolverConfig {
            gamma: None,
            epsilon,
            max_iter,
            certificate_period: DEFAULT_CERTIFICATE_PERIOD,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter("gamma must be positive".into()));
            }
        }
        if self.certificate_period == 0 {
            return Err(Error::InvalidParameter("certificate period must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub point: JointPoint,
    pub ledger: QueryLedger,
    pub iterations: usize,
    /// Certified upper bound on the squared distance from `point` to the solution.
    pub certified_sq_distance: Option<f64>,
    /// Certificate (or gap) values in evaluation order.
    pub residual_history: Vec<f64>,
    pub status: SolveStatus,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `(z_hat, z_plus)` with `z_hat = P(z - gamma F(z))`, `z_plus = P(z - gamma F(z_hat))`.
pub fn extragradient_step<P: VariationalProblem + ?Sized>(
    problem: &P,
    z: &JointPoint,
    gamma: f64,
    ledger: &mut QueryLedger,
    kind: QueryKind,
) -> Result<(JointPoint, JointPoint)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let f = problem.operator(z, ledger, kind)?;
    let z_hat = problem.project(&z.add_scaled(-gamma, &f));
    let f_hat = problem.operator(&z_hat, ledger, kind)?;
    let z_plus = problem.project(&z.add_scaled(-gamma, &f_hat));
    Ok((z_hat, z_plus))
}

/// `4/(m g)^2 - 2/(m g) + 16`
pub fn certificate_coefficient(modulus: f64, gamma: f64) -> f64 {
    let mg = modulus * gamma;
    4.0 / (mg * mg) - 2.0 / mg + 16.0
}

/// Upper bound on the squared distance from `z_bar` to the solution, from one
/// extragradient step at `gamma <= 1/(2L)`. Charged to the certificate counter.
pub fn certify_distance<P: VariationalProblem + ?Sized>(
    problem: &P,
    z_bar: &JointPoint,
    gamma: f64,
    modulus: f64,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    if !(modulus > 0.0) {
        return Err(Error::InvalidParameter(
            "distance certificate needs a positive monotonicity modulus".into(),
        ));
    }
    let l = problem.lipschitz();
    if !(gamma > 0.0 && gamma <= (1.0 + 1e-12) / (2.0 * l)) {
        return Err(Error::InvalidParameter(format!(
            "certificate step must lie in (0, 1/(2L)] (gamma = {gamma}, L = {l})"
        )));
    }
    let (_, z_plus) = extragradient_step(problem, z_bar, gamma, ledger, QueryKind::Cert)?;
    Ok(certificate_coefficient(modulus, gamma) * z_plus.dist_sq(z_bar))
}

/// One projected ascent step per player from `z_bar` and the resulting bound
/// `(2/gamma) sqrt(D_X^2 + D_Y^2) dist` on the deviation gain, where `dist`
/// bounds `|z_bar - z*|`.
pub fn extract_approx_ne(
    game: &GameSpec,
    z_bar: &JointPoint,
    gamma: f64,
    dist: f64,
    ledger: &mut QueryLedger,
) -> Result<(JointPoint, f64)> {
    let max_gamma = 1.0 / (std::f64::consts::SQRT_2 * game.l());
    if !(gamma > 0.0 && gamma <= max_gamma * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "extraction step must lie in (0, 1/(sqrt(2) L)] (gamma = {gamma})"
        )));
    }
    let f = game.operator_f_as(z_bar, ledger, QueryKind::Cert)?;
    let z_hat = game.project(&z_bar.add_scaled(-gamma, &f));
    Ok((z_hat, 2.0 / gamma * game.diameter_sq().sqrt() * dist))
}

struct CertificateTracker {
    gamma: f64,
    modulus: f64,
    last: Option<f64>,
    history: Vec<f64>,
}

impl CertificateTracker {
    fn new<P: VariationalProblem + ?Sized>(problem: &P) -> Result<Self> {
        let modulus = problem.modulus();
        if !(modulus > 0.0) {
            return Err(Error::Precondition(
                "certified stopping needs a strongly monotone operator".into(),
            ));
        }
        Ok(CertificateTracker {
            gamma: 1.0 / (2.0 * problem.lipschitz()),
            modulus,
            last: None,
            history: Vec::new(),
        })
    }

    fn check<P: VariationalProblem + ?Sized>(
        &mut self,
        problem: &P,
        z: &JointPoint,
        ledger: &mut QueryLedger,
    ) -> Result<f64> {
        let c = certify_distance(problem, z, self.gamma, self.modulus, ledger)?;
        self.history.push(c);
        self.last = Some(c);
        Ok(c)
    }
}

/// Extragradient with step `1/(sqrt(2) L)` from the problem's start point,
/// stopped once the distance certificate falls below `epsilon`.
pub fn solve_eg<P: VariationalProblem + ?Sized>(problem: &P, config: &SolverConfig) -> Result<SolveReport> {
    solve_eg_from(problem, &problem.start(), config)
}

pub fn solve_eg_from<P: VariationalProblem + ?Sized>(
    problem: &P,
    start: &JointPoint,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_eg_with(problem, start, config, None)
}

/// Extragradient with an optional monitor run before each certificate check.
pub fn solve_eg_with<P: VariationalProblem + ?Sized>(
    problem: &P,
    start: &JointPoint,
    config: &SolverConfig,
    mut monitor: Option<SolveMonitor<'_>>,
) -> Result<SolveReport> {
    config.validate()?;
    let gamma = config
        .gamma
        .unwrap_or(1.0 / (std::f64::consts::SQRT_2 * problem.lipschitz()));
    let kind = problem.query_kind();
    let mut tracker = CertificateTracker::new(problem)?;
    let mut ledger = QueryLedger::default();
    let mut z = problem.project(start);
    let mut k = 0;
    loop {
        if k % config.certificate_period == 0 || k == config.max_iter {
            if let Some(m) = monitor.as_mut() {
                if m(&z, &mut ledger)? {
                    return Ok(report(z, ledger, k, tracker, SolveStatus::Converged));
                }
            }
            let c = tracker.check(problem, &z, &mut ledger)?;
            if c <= config.epsilon {
                return Ok(report(z, ledger, k, tracker, SolveStatus::Converged));
            }
        }
        if k == config.max_iter {
            return Ok(report(z, ledger, k, tracker, SolveStatus::MaxIter));
        }
        let (_, z_plus) = extragradient_step(problem, &z, gamma, &mut ledger, kind)?;
        z = z_plus;
        k += 1;
    }
}

/// Optimistic gradient with step `1/(2L)`:
/// `z_{k+1} = P(z_k - gamma (2 F(z_k) - F(z_{k-1})))`, `F(z_{-1}) = F(z_0)`.
pub fn solve_ogda<P: VariationalProblem + ?Sized>(problem: &P, config: &SolverConfig) -> Result<SolveReport> {
    solve_ogda_from(problem, &problem.start(), config)
}

pub fn solve_ogda_from<P: VariationalProblem + ?Sized>(
    problem: &P,
    start: &JointPoint,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let gamma = config.gamma.unwrap_or(1.0 / (2.0 * problem.lipschitz()));
    let kind = problem.query_kind();
    let mut tracker = CertificateTracker::new(problem)?;
    let mut ledger = QueryLedger::default();
    let mut z = problem.project(start);
    let mut prev: Option<JointPoint> = None;
    let mut k = 0;
    loop {
        if k % config.certificate_period == 0 || k == config.max_iter {
            let c = tracker.check(problem, &z, &mut ledger)?;
            if c <= config.epsilon {
                return Ok(report(z, ledger, k, tracker, SolveStatus::Converged));
            }
        }
        if k == config.max_iter {
            return Ok(report(z, ledger, k, tracker, SolveStatus::MaxIter));
        }
        let f = problem.operator(&z, &mut ledger, kind)?;
        let f_prev = prev.as_ref().unwrap_or(&f);
        let step = f.scaled(2.0).sub(f_prev);
        z = problem.project(&z.add_scaled(-gamma, &step));
        prev = Some(f);
        k += 1;
    }
}

fn report(
    point: JointPoint,
    ledger: QueryLedger,
    iterations: usize,
    tracker: CertificateTracker,
    status: SolveStatus,
) -> SolveReport {
    SolveReport {
        point,
        ledger,
        iterations,
        certified_sq_distance: tracker.last,
        residual_history: tracker.history,
        status,
    }
}

/// Options for [`solve_apd_bilinear_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApdOptions {
    pub max_iter: usize,
    pub check_period: usize,
    /// Skip the distance certificate and rely on the monitor alone.
    pub certify: bool,
}

impl Default for ApdOptions {
    fn default() -> Self {
        ApdOptions {
            max_iter: 1_000_000,
            check_period: DEFAULT_CERTIFICATE_PERIOD,
            certify: true,
        }
    }
}

/// Largest primal-dual acceleration parameter used when the coupling vanishes.
const MAX_ACCELERATION: f64 = 1e6;

/// Primal-dual parameters `(tau, sigma, theta)` for a bilinear subproblem with
/// strong convexity `a` in `x`, `b` in `y` and coupling norm `c`.
pub fn apd_parameters(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let accel = if c > 0.0 {
        (2.0 * (a * b).sqrt() / c).min(MAX_ACCELERATION)
    } else {
        MAX_ACCELERATION
    };
    (accel / (2.0 * a), accel / (2.0 * b), 1.0 / (1.0 + accel))
}

/// Primal-dual solve of a bilinear subproblem from its proximal center to a
/// certified squared distance `target_sq_dist`.
pub fn solve_apd_bilinear(sub: &SaddleSubproblem<'_>, target_sq_dist: f64) -> Result<SolveReport> {
    solve_apd_bilinear_with(sub, &sub.center, target_sq_dist, &ApdOptions::default(), None)
}


/// Primal-dual method with both strong-convexity step rules. Proximal maps are
/// shifted projections: every separable part is an isotropic quadratic plus a
/// linear term plus a set indicator. One iteration costs one application of
/// the coupling and its transpose, charged as one query of the subproblem.
pub fn solve_apd_bilinear_with(
    sub: &SaddleSubproblem<'_>,
    start: &JointPoint,
    target_sq_dist: f64,
    opts: &ApdOptions,
    mut monitor: Option<SolveMonitor<'_>>,
) -> Result<SolveReport> {
    let structure = sub.game.structure.as_ref().ok_or(Error::StructureUnavailable)?;
    if opts.check_period == 0 {
        return Err(Error::InvalidParameter("check period must be >= 1".into()));
    }
    let (a, b) = (sub.curv_x(), sub.curv_y());
    let (lx, ly) = sub.linear_terms();
    let (tau, sigma, theta) = apd_parameters(a, b, structure.coupling_norm() * (1.0 + 1e-6));
    let kind = sub.query_kind();
    let game = sub.game;
    let mut tracker = if opts.certify {
        Some(CertificateTracker::new(sub)?)
    } else {
        None
    };

    let (nx, ny) = (game.dim_x(), game.dim_y());
    let mut x = game.project(start).x.into_vec();
    let mut y = game.project(start).y.into_vec();
    let mut x_bar = x.clone();
    let mut cx = vec![0.0; ny];
    let mut cty = vec![0.0; nx];
    let mut wx = vec![0.0; nx];
    let mut wy = vec![0.0; ny];
    let mut x_new = vec![0.0; nx];
    let mut ledger = QueryLedger::default();
    let sx = 1.0 / (1.0 + tau * a);
    let sy = 1.0 / (1.0 + sigma * b);

    let mut k = 0;
    loop {
        if k % opts.check_period == 0 || k == opts.max_iter {
            let z = JointPoint::new(DenseVector::from_raw(x.clone()), DenseVector::from_raw(y.clone()));
            if let Some(m) = monitor.as_mut() {
                if m(&z, &mut ledger)? {
                    return Ok(apd_report(z, ledger, k, tracker, SolveStatus::Converged));
                }
            }
            if let Some(t) = tracker.as_mut() {
                if t.check(sub, &z, &mut ledger)? <= target_sq_dist {
                    return Ok(apd_report(z, ledger, k, tracker, SolveStatus::Converged));
                }
            }
            if k == opts.max_iter {
                return Ok(apd_report(z, ledger, k, tracker, SolveStatus::MaxIter));
            }
        }
        structure.apply(&x_bar, &mut cx);
        for j in 0..ny {
            wy[j] = (y[j] + sigma * cx[j] - sigma * ly[j]) * sy;
        }
        game.y_set.project_into(&wy, &mut y);
        structure.apply_t(&y, &mut cty);
        for i in 0..nx {
            wx[i] = (x[i] - tau * cty[i] - tau * lx[i]) * sx;
        }
        game.x_set.project_into(&wx, &mut x_new);
        for i in 0..nx {
            x_bar[i] = x_new[i] + theta * (x_new[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut x_new);
        ledger.record(kind, 1);
        k += 1;
    }
}

/// Restarted accelerated projected gradient on one side of a bilinear
/// subproblem, the other side solved in closed form.
///
/// The side with the larger curvature is eliminated: for `y`,
/// `y(x) = P_Y((C x - l_y) / b)` and the reduced objective in `x` is
/// `a`-strongly convex with gradient `a x + l_x + C^T y(x)`, Lipschitz with
/// constant at most `a + |C|^2 / b`. The step follows a backtracked local
/// estimate of that constant, capped by the global bound; the global bound
/// is used while the sufficient-decrease test is below rounding noise. Momentum uses the
/// strong-convexity rule and is reset when the reduced objective increases,
/// at most once per condition root of iterations.
///
/// Images of the iterates under the coupling are cached; the extrapolated
/// image is a linear combination of them. Each trial step applies the
/// coupling to the new iterate and its transpose to the extrapolated best
/// response, which is one operator evaluation.
pub fn solve_accelerated_bilinear_with(
    sub: &SaddleSubproblem<'_>,
    start: &JointPoint,
    target_sq_dist: f64,
    opts: &ApdOptions,
    mut monitor: Option<SolveMonitor<'_>>,
) -> Result<SolveReport> {
    let structure = sub.game.structure.as_ref().ok_or(Error::StructureUnavailable)?;
    if opts.check_period == 0 {
        return Err(Error::InvalidParameter("check period must be >= 1".into()));
    }
    let game = sub.game;
    let (a, b) = (sub.curv_x(), sub.curv_y());
    let (lx, ly) = sub.linear_terms();
    let c_norm = structure.coupling_norm() * (1.0 + 1e-6);
    let kind = sub.query_kind();
    let mut tracker = if opts.certify {
        Some(CertificateTracker::new(sub)?)
    } else {
        None
    };
    // `u` is the iterated side, `w` the eliminated one; `s` fixes the signs.
    let eliminate_y = b >= a;
    let (a_u, a_w, s) = if eliminate_y { (a, b, 1.0) } else { (b, a, -1.0) };
    let (l_u, l_w) = if eliminate_y { (&lx, &ly) } else { (&ly, &lx) };
    let (set_u, set_w) = if eliminate_y {
        (&game.x_set, &game.y_set)
    } else {
        (&game.y_set, &game.x_set)
    };
    let forward = |u: &[f64], out: &mut [f64]| {
        if eliminate_y {
            structure.apply(u, out)
        } else {
            structure.apply_t(u, out)
        }
    };
    let backward = |w: &[f64], out: &mut [f64]| {
        if eliminate_y {
            structure.apply_t(w, out)
        } else {
            structure.apply(w, out)
        }
    };
    let l_max = a_u + c_norm * c_norm / a_w;

    let p0 = game.project(start);
    let mut u = if eliminate_y { p0.x.into_vec() } else { p0.y.into_vec() };
    let (n_u, n_w) = (u.len(), l_w.len());
    let mut fu = vec![0.0; n_w];
    forward(&u, &mut fu);
    let mut u_prev = u.clone();
    let mut fu_prev = fu.clone();
    let mut v = vec![0.0; n_u];
    let mut fv = vec![0.0; n_w];
    let mut w_in = vec![0.0; n_w];
    let mut w = vec![0.0; n_w];
    let mut grad = vec![0.0; n_u];
    let mut u_in = vec![0.0; n_u];
    let mut u_new = vec![0.0; n_u];
    let mut fu_new = vec![0.0; n_w];
    let mut ledger = QueryLedger::default();
    ledger.record(kind, 1);

    // Best response `w` to an image `f`, returning the eliminated value.
    let best_response = |f: &[f64], w_in: &mut [f64], w: &mut [f64]| -> f64 {
        for j in 0..w.len() {
            w_in[j] = (s * f[j] - l_w[j]) / a_w;
        }
        set_w.project_into(w_in, w);
        (0..w.len()).map(|j| w[j] * (s * f[j] - l_w[j] - 0.5 * a_w * w[j])).sum()
    };
    let own = |u: &[f64]| -> f64 { (0..u.len()).map(|i| u[i] * (0.5 * a_u * u[i] + l_u[i])).sum() };
    let joint = |u: &[f64], w: &[f64]| -> JointPoint {
        let (x, y) = if eliminate_y { (u, w) } else { (w, u) };
        JointPoint::new(DenseVector::from_raw(x.to_vec()), DenseVector::from_raw(y.to_vec()))
    };

    let mut value_u = own(&u) + best_response(&fu, &mut w_in, &mut w);
    let mut lk = l_max;
    let mut last_restart = 0usize;
    let mut k = 0;
    loop {
        if k % opts.check_period == 0 || k == opts.max_iter {
            best_response(&fu, &mut w_in, &mut w);
            let z = joint(&u, &w);
            if let Some(m) = monitor.as_mut() {
                if m(&z, &mut ledger)? {
                    return Ok(apd_report(z, ledger, k, tracker, SolveStatus::Converged));
                }
            }
            if let Some(t) = tracker.as_mut() {
                if t.check(sub, &z, &mut ledger)? <= target_sq_dist {
                    return Ok(apd_report(z, ledger, k, tracker, SolveStatus::Converged));
                }
            }
            if k == opts.max_iter {
                return Ok(apd_report(z, ledger, k, tracker, SolveStatus::MaxIter));
            }
        }
        let value_trial;
        let noisy;
        loop {
            let q = (a_u / lk).min(1.0).sqrt();
            let momentum = (1.0 - q) / (1.0 + q);
            for i in 0..n_u {
                v[i] = u[i] + momentum * (u[i] - u_prev[i]);
            }
            for j in 0..n_w {
                fv[j] = fu[j] + momentum * (fu[j] - fu_prev[j]);
            }
            let value_v = own(&v) + best_response(&fv, &mut w_in, &mut w);
            backward(&w, &mut grad);
            for i in 0..n_u {
                grad[i] = a_u * v[i] + l_u[i] + s * grad[i];
                u_in[i] = v[i] - grad[i] / lk;
            }
            set_u.project_into(&u_in, &mut u_new);
            forward(&u_new, &mut fu_new);
            ledger.record(kind, 1);
            let value_new = own(&u_new) + best_response(&fu_new, &mut w_in, &mut w);
            let (mut lin, mut quad) = (0.0, 0.0);
            for i in 0..n_u {
                let d = u_new[i] - v[i];
                lin += grad[i] * d;
                quad += d * d;
            }
            let noise = 1e-14 * (value_v.abs() + value_new.abs());
            let model = lin + 0.5 * lk * quad;
            // Below the rounding noise the value test says nothing; only the global bound is safe.
            let reliable = model.abs() > noise;
            if (reliable && value_new <= value_v + model + noise) || lk >= l_max {
                value_trial = value_new;
                noisy = !reliable;
                break;
            }
            lk = (2.0 * lk).min(l_max);
        }
        k += 1;
        // Restarts are at least one condition root apart.
        let restart_gap = (lk / a_u).sqrt().ceil() as usize;
        let increased = value_trial > value_u;
        value_u = value_trial;
        if increased && k >= last_restart + restart_gap {
            last_restart = k;
            u_prev.copy_from_slice(&u_new);
            fu_prev.copy_from_slice(&fu_new);
        } else {
            std::mem::swap(&mut u_prev, &mut u);
            std::mem::swap(&mut fu_prev, &mut fu);
        }
        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut fu, &mut fu_new);
        if !noisy {
            lk = (lk * BACKTRACK_DECAY).max(a_u);
        }
    }
}

fn apd_report(
    point: JointPoint,
    ledger: QueryLedger,
    iterations: usize,
    tracker: Option<CertificateTracker>,
    status: SolveStatus,
) -> SolveReport {
    let (best, history) = tracker.map_or((None, Vec::new()), |t| (t.last, t.history));
    SolveReport {
        point,
        ledger,
        iterations,
        certified_sq_distance: best,
        residual_history: history,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameConstants, PayoffOracle};
    use crate::sets::FeasibleSet;
    use std::sync::Arc;

    /// `F(z) = z` on `[-2, 2]` (x only, y pinned to a point box).
    struct Identity;

    impl PayoffOracle for Identity {
        fn grad_u1_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
            vec![-x[0]]
        }
        fn grad_u1_y(&self, _x: &[f64], _y: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
        fn grad_u2_x(&self, _x: &[f64], _y: &[f64]) -> Vec<f64> {
            vec![0.0]
        }
        fn grad_u2_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
            vec![-y[0]]
        }
    }

    fn identity_game() -> GameSpec {
        let c = GameConstants {
            l: 1.0,
            mu: 1.0,
            nu: 1.0,
            delta: 1.0,
        };
        GameSpec::new(
            Arc::new(Identity),
            c,
            FeasibleSet::boxed(vec![-2.0], vec![2.0]).unwrap(),
            FeasibleSet::boxed(vec![-2.0], vec![2.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hand_extragradient_step() {
        let game = identity_game();
        let z = JointPoint::from_vecs(vec![1.0], vec![0.0]).unwrap();
        let mut ledger = QueryLedger::default();
        let (h, p) = extragradient_step(&game, &z, 0.5, &mut ledger, QueryKind::F).unwrap();
        assert_eq!(h.x.as_slice(), &[0.5]);
        assert_eq!(p.x.as_slice(), &[0.75]);
        assert_eq!(ledger.f_queries, 2);
    }

    #[test]
    fn coefficient_at_half() {
        assert_eq!(certificate_coefficient(1.0, 0.5), 28.0);
        assert_eq!(certificate_coefficient(0.25, 2.0), 28.0);
    }

    #[test]
    fn certificate_rejects_bad_inputs() {
        let game = identity_game();
        let z = game.initial_point();
        let mut ledger = QueryLedger::default();
        assert!(certify_distance(&game, &z, 0.5, 0.0, &mut ledger).is_err());
        assert!(certify_distance(&game, &z, 0.6, 1.0, &mut ledger).is_err());
        assert_eq!(certify_distance(&game, &z, 0.5, 1.0, &mut ledger).unwrap(), 0.0);
        assert_eq!(ledger.cert_queries, 2);
    }

    #[test]
    fn extraction_bound_formula() {
        let game = identity_game();
        let l = game.l();
        let gamma = 1.0 / (std::f64::consts::SQRT_2 * l);
        let z = game.initial_point();
        let mut ledger = QueryLedger::default();
        let (_, bound) = extract_approx_ne(&game, &z, gamma, 1e-3, &mut ledger).unwrap();
        // D^2 = 16 + 16 here.
        let expected = 2.0 * std::f64::consts::SQRT_2 * l * 32f64.sqrt() * 1e-3;
        assert!((bound - expected).abs() < 1e-15);
        assert!(extract_approx_ne(&game, &z, 1.0, 0.0, &mut ledger).is_err());
    }

    #[test]
    fn eg_counts_two_queries_per_iteration() {
        let game = identity_game();
        let start = JointPoint::from_vecs(vec![1.5], vec![-1.0]).unwrap();
        let r = solve_eg_from(&game, &start, &SolverConfig::new(1e-12, 10_000)).unwrap();
        assert!(r.converged());
        assert_eq!(r.ledger.f_queries, 2 * r.iterations as u64);
        assert!(r.point.norm_sq() <= 1e-12);
    }

    #[test]
    fn apd_parameters_satisfy_step_condition() {
        for &(a, b, c) in &[(1.0, 1.0, 1.0), (1e-4, 1.0, 2.0), (3.0, 0.01, 0.5)] {
            let (tau, sigma, theta) = apd_parameters(a, b, c);
            assert!(tau * sigma * c * c <= 1.0 + 1e-12);
            assert!(theta > 0.0 && theta < 1.0);
        }
    }
}
