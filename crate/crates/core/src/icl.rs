//! Iterative coupling linearization.
//!
//! Each outer step freezes the coupling gradient `c = grad g(z_t)` and solves
//! the proximal zero-sum subproblem
//!
//! ```text
//! min_x max_y  <c_x, x> + |x - x_t|^2 / (2 eta) + h(x, y)
//!              - <c_y, y> - |y - y_t|^2 / (2 eta)
//! ```
//!
//! to the accuracy required by the outer contraction, measured as the
//! variational-inequality gap of the subproblem.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{GameConstants, GameSpec, JointPoint, PayoffOracle, QueryKind, QueryLedger};
use crate::game::BilinearStructure;
use crate::saddle::{
    certify_distance, extract_approx_ne, solve_accelerated_bilinear_with, solve_apd_bilinear_with, solve_eg_with, ApdOptions,
    SolveReport, SolveStatus, SolverConfig, VariationalProblem, DEFAULT_CERTIFICATE_PERIOD,
};
use crate::vecmat::{dot, DenseVector};

/// The proximal zero-sum subproblem around `center`.
#[derive(Debug, Clone)]
pub struct SaddleSubproblem<'a> {
    pub game: &'a GameSpec,
    /// Frozen coupling gradient at the center.
    pub c: JointPoint,
    pub center: JointPoint,
    pub eta: f64,
}

impl<'a> SaddleSubproblem<'a> {
    fn structure(&self) -> Option<&BilinearStructure> {
        self.game.structure.as_deref()
    }

    /// Strong convexity in `x` of the structured subproblem.
    pub fn curv_x(&self) -> f64 {
        self.structure().map_or(self.game.mu(), |s| s.curv_x) + 1.0 / self.eta
    }

    /// Strong concavity in `y` of the structured subproblem.
    pub fn curv_y(&self) -> f64 {
        self.structure().map_or(self.game.nu(), |s| s.curv_y) + 1.0 / self.eta
    }

    /// Linear terms `(l_x, l_y)` of the separable parts: the operator is
    /// `(C^T y + curv_x x + l_x, -C x + curv_y y + l_y)`.
    pub fn linear_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let inv = 1.0 / self.eta;
        let (p, q): (&[f64], &[f64]) = match self.structure() {
            Some(s) => (&s.lin_x, &s.lin_y),
            None => (&[], &[]),
        };
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        let lx = (0..self.c.x.len())
            .map(|i| at(p, i) + self.c.x[i] - inv * self.center.x[i])
            .collect();
        let ly = (0..self.c.y.len())
            .map(|j| self.c.y[j] - at(q, j) - inv * self.center.y[j])
            .collect();
        (lx, ly)
    }

    /// `H(z) + c + (z - center) / eta`, with no ledger charge.
    fn eval(&self, z: &JointPoint) -> Result<JointPoint> {
        let inv = 1.0 / self.eta;
        let h = match self.structure() {
            Some(s) => {
                let gx = s.grad_x(&z.x, &z.y);
                let mut gy = s.grad_y(&z.x, &z.y);
                gy.iter_mut().for_each(|v| *v = -*v);
                JointPoint::new(DenseVector::from_raw(gx), DenseVector::from_raw(gy))
            }
            None => self.game.eval_h(z)?,
        };
        let shift = |h: &[f64], c: &[f64], z: &[f64], z0: &[f64]| -> DenseVector {
            DenseVector::from_raw(
                (0..h.len()).map(|i| h[i] + c[i] + inv * (z[i] - z0[i])).collect(),
            )
        };
        Ok(JointPoint::new(
            shift(&h.x, &self.c.x, &z.x, &self.center.x),
            shift(&h.y, &self.c.y, &z.y, &self.center.y),
        ))
    }
}

impl VariationalProblem for SaddleSubproblem<'_> {
    fn operator(
        &self,
        z: &JointPoint,
        ledger: &mut QueryLedger,
        kind: QueryKind,
    ) -> Result<JointPoint> {
        ledger.record(kind, 1);
        self.eval(z)
    }

    fn project(&self, z: &JointPoint) -> JointPoint {
        self.game.project(z)
    }

    /// `max(2L, L + 1/eta)`
    fn lipschitz(&self) -> f64 {
        let l = self.game.l();
        (2.0 * l).max(l + 1.0 / self.eta)
    }

    fn modulus(&self) -> f64 {
        self.game.min_modulus() + 1.0 / self.eta
    }

    fn query_kind(&self) -> QueryKind {
        QueryKind::H
    }

    fn start(&self) -> JointPoint {
        self.center.clone()
    }
}

/// Builds the subproblem around `center`, charging one coupling-gradient query.
pub fn build_subproblem<'a>(
    game: &'a GameSpec,
    center: &JointPoint,
    eta: f64,
    ledger: &mut QueryLedger,
) -> Result<SaddleSubproblem<'a>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let c = game.grad_g(center, ledger)?;
    Ok(SaddleSubproblem {
        game,
        c,
        center: center.clone(),
        eta,
    })
}

/// `<Phi(z), z> - min_{w in X x Y} <Phi(z), w>` for the subproblem operator
/// `Phi`; zero exactly at the subproblem solution. One certificate query.
pub fn check_inexactness(
    sub: &SaddleSubproblem<'_>,
    candidate: &JointPoint,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    let phi = sub.operator(candidate, ledger, QueryKind::Cert)?;
    Ok(vi_gap(sub.game, &phi, candidate))
}

fn vi_gap(game: &GameSpec, phi: &JointPoint, z: &JointPoint) -> f64 {
    (dot(&phi.x, &z.x) - game.x_set.support_min(&phi.x))
        + (dot(&phi.y, &z.y) - game.y_set.support_min(&phi.y))
}

/// One projected step along the subproblem operator, then its gap.
/// Two certificate queries.
fn extract_and_check(
    sub: &SaddleSubproblem<'_>,
    candidate: &JointPoint,
    gamma: f64,
    ledger: &mut QueryLedger,
) -> Result<(JointPoint, f64)> {
    let phi = sub.operator(candidate, ledger, QueryKind::Cert)?;
    let z_hat = sub.project(&candidate.add_scaled(-gamma, &phi));
    let gap = check_inexactness(sub, &z_hat, ledger)?;
    Ok((z_hat, gap))
}

/// Step size, contraction and accuracy targets of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IclSchedule {
    pub eta: f64,
    pub theta: f64,
    /// Accepted inexactness gap per outer iteration.
    pub eps_t: f64,
    /// Outer iterations sufficient for the requested accuracy.
    pub outer_iterations: usize,
    /// Squared-distance target of each inner solve.
    pub inner_target: f64,
}

/// `eta = min(1/delta, 1/m)`, `theta = m / (1/eta + m)`, `eps_t = theta eps / (4 eta)`,
/// `T = ceil(ln(2 D^2 / eps) / theta)`, inner target `eps_t^2 / (8 L^2 D^2)`,
/// with `m = min(mu, nu)` and `D^2 = D_X^2 + D_Y^2`.
pub fn schedule_params(
    mu: f64,
    nu: f64,
    delta: f64,
    l: f64,
    eps: f64,
    d_x: f64,
    d_y: f64,
) -> Result<IclSchedule> {
    let m = mu.min(nu);
    if !(m > 0.0) {
        return Err(Error::Precondition(
            "outer schedule needs min(mu, nu) > 0; use solve_monotone for merely monotone games".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if !(delta >= 0.0 && delta <= l) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, L], got {delta}")));
    }
    let eta = if delta > 0.0 { (1.0 / delta).min(1.0 / m) } else { 1.0 / m };
    let theta = m / (1.0 / eta + m);
    let eps_t = theta * eps / (4.0 * eta);
    let d_sq = d_x * d_x + d_y * d_y;
    let ratio = 2.0 * d_sq / eps;
    let outer_iterations = if ratio > 1.0 {
        ((ratio.ln() / theta).ceil() as usize).max(1)
    } else {
        1
    };
    let inner_target = if d_sq > 0.0 {
        eps_t * eps_t / (8.0 * l * l * d_sq)
    } else {
        eps_t
    };
    Ok(IclSchedule {
        eta,
        theta,
        eps_t,
        outer_iterations,
        inner_target,
    })
}

/// Which solver handles the subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Accelerated when bilinear structure is available, extragradient otherwise.
    Auto,
    /// Restarted accelerated gradient with one side eliminated; needs bilinear structure.
    Accelerated,
    /// Primal-dual; needs bilinear structure.
    PrimalDual,
    Extragradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclOptions {
    pub inner: InnerSolver,
    /// Stop the outer loop once the distance certificate of the whole game
    /// falls below `eps`. The fixed outer budget still applies.
    pub outer_certificate: bool,
    pub check_period: usize,
    pub max_inner_iter: usize,
    /// Point used for the per-iteration distance trace; defaults to the
    /// game's known equilibrium.
    pub reference: Option<JointPoint>,
}

impl Default for IclOptions {
    fn default() -> Self {
        IclOptions {
            inner: InnerSolver::Auto,
            outer_certificate: true,
            check_period: DEFAULT_CERTIFICATE_PERIOD,
            max_inner_iter: 2_000_000,
            reference: None,
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IclStep {
    pub inner_iterations: usize,
    /// Inexactness gap of the accepted iterate.
    pub gap: f64,
    /// Squared distances to the reference before and after the step.
    pub dist_sq_before: Option<f64>,
    pub dist_sq_after: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IclReport {
    pub solve: SolveReport,
    pub schedule: IclSchedule,
    pub steps: Vec<IclStep>,
}

impl IclReport {
    /// Largest value of `(1/(2 eta) + m/2) d_{t+1} - (1/(2 eta)) d_t - eps_t`
    /// relative to `(1/(2 eta)) d_t + eps_t` over the trace.
    pub fn worst_descent_violation(&self, m: f64) -> Option<f64> {
        let s = &self.schedule;
        let a = 0.5 / s.eta;
        self.steps
            .iter()
            .map(|st| {
                let (d0, d1) = (st.dist_sq_before?, st.dist_sq_after?);
                let rhs = a * d0 + s.eps_t;
                Some(((a + 0.5 * m) * d1 - rhs) / rhs)
            })
            .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
    }
}

/// Runs the outer loop for a game with `min(mu, nu) > 0` to squared accuracy `eps`.
pub fn solve_icl(game: &GameSpec, eps: f64, opts: &IclOptions) -> Result<IclReport> {
    let schedule = schedule_params(
        game.mu(),
        game.nu(),
        game.delta(),
        game.l(),
        eps,
        game.diameter_x(),
        game.diameter_y(),
    )?;
    if opts.check_period == 0 {
        return Err(Error::InvalidParameter("check period must be >= 1".into()));
    }
    let inner_kind = match opts.inner {
        InnerSolver::Auto if game.structure.is_some() => InnerSolver::Accelerated,
        InnerSolver::Auto => InnerSolver::Extragradient,
        InnerSolver::Accelerated | InnerSolver::PrimalDual if game.structure.is_none() => {
            return Err(Error::StructureUnavailable)
        }
        other => other,
    };
    let reference = opts.reference.as_ref().or(game.known_ne.as_ref());
    let outer_cert = opts.outer_certificate && game.monotone_modulus > 0.0;
    let cert_gamma = 1.0 / (2.0 * game.l());

    let mut ledger = QueryLedger::default();
    let mut z = game.initial_point();
    let mut steps = Vec::new();
    let mut history = Vec::new();
    let mut certified = None;
    let mut status = SolveStatus::Converged;

    for t in 0..schedule.outer_iterations {
        let sub = build_subproblem(game, &z, schedule.eta, &mut ledger)?;
        let step_gamma = 1.0 / (std::f64::consts::SQRT_2 * sub.lipschitz());
        let accepted: RefCell<Option<(JointPoint, f64)>> = RefCell::new(None);
        let last_gap = Cell::new(f64::INFINITY);
        let mut monitor = |cand: &JointPoint, led: &mut QueryLedger| -> Result<bool> {
            let (z_hat, gap) = extract_and_check(&sub, cand, step_gamma, led)?;
            last_gap.set(gap);
            let ok = gap <= schedule.eps_t;
            if ok {
                *accepted.borrow_mut() = Some((z_hat, gap));
            }
            Ok(ok)
        };
        let apd = ApdOptions {
            max_iter: opts.max_inner_iter,
            check_period: opts.check_period,
            certify: true,
        };
        let target = schedule.inner_target;
        let inner = match inner_kind {
            InnerSolver::Accelerated => {
                solve_accelerated_bilinear_with(&sub, &z, target, &apd, Some(&mut monitor))?
            }
            InnerSolver::PrimalDual => {
                solve_apd_bilinear_with(&sub, &z, target, &apd, Some(&mut monitor))?
            }
            _ => {
                let cfg = SolverConfig {
                    gamma: None,
                    epsilon: target,
                    max_iter: opts.max_inner_iter,
                    certificate_period: opts.check_period,
                };
                solve_eg_with(&sub, &z, &cfg, Some(&mut monitor))?
            }
        };
        ledger.merge(&inner.ledger);
        let (z_next, gap) = match accepted.into_inner() {
            Some(a) => a,
            None if inner.status == SolveStatus::Converged => {
                // Certified to the inner target but not yet gap-checked there.
                let (z_hat, gap) = extract_and_check(&sub, &inner.point, step_gamma, &mut ledger)?;
                if gap > schedule.eps_t {
                    return Err(Error::TheoryViolation {
                        gap,
                        target: schedule.eps_t,
                    });
                }
                (z_hat, gap)
            }
            None => {
                return Err(Error::InnerFailure {
                    outer: t,
                    iterations: inner.iterations,
                    gap: last_gap.get(),
                    target: schedule.eps_t,
                })
            }
        };
        steps.push(IclStep {
            inner_iterations: inner.iterations,
            gap,
            dist_sq_before: reference.map(|r| z.dist_sq(r)),
            dist_sq_after: reference.map(|r| z_next.dist_sq(r)),
        });
        history.push(gap);
        z = z_next;
        if outer_cert {
            let c = certify_distance(game, &z, cert_gamma, game.monotone_modulus, &mut ledger)?;
            certified = Some(c);
            if c <= eps {
                break;
            }
        }
    }
    if !outer_cert && game.monotone_modulus > 0.0 {
        certified = Some(certify_distance(
            game,
            &z,
            cert_gamma,
            game.monotone_modulus,
            &mut ledger,
        )?);
    }
    if outer_cert && certified.map_or(true, |c| c > eps) {
        // The outer budget guarantees the accuracy; the certificate is only
        // conservative, so exhausting the budget still counts as converged.
        status = SolveStatus::Converged;
    }
    let iterations = steps.len();
    Ok(IclReport {
        solve: SolveReport {
            point: z,
            ledger,
            iterations,
            certified_sq_distance: certified,
            residual_history: history,
            status,
        },
        schedule,
        steps,
    })
}

/// `u1 - a_x |x|^2 + a_y |y|^2`, `u2 + a_x |x|^2 - a_y |y|^2`: adds curvature
/// to the zero-sum part only.
struct CurvatureShift {
    inner: Arc<dyn PayoffOracle>,
    add_x: f64,
    add_y: f64,
}

impl PayoffOracle for CurvatureShift {
    fn grad_u1_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u1_x(x, y);
        g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= 2.0 * self.add_x * xi);
        g
    }

    fn grad_u1_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u1_y(x, y);
        g.iter_mut().zip(y).for_each(|(gi, yi)| *gi += 2.0 * self.add_y * yi);
        g
    }

    fn grad_u2_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u2_x(x, y);
        g.iter_mut().zip(x).for_each(|(gi, xi)| *gi += 2.0 * self.add_x * xi);
        g
    }

    fn grad_u2_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad_u2_y(x, y);
        g.iter_mut().zip(y).for_each(|(gi, yi)| *gi -= 2.0 * self.add_y * yi);
        g
    }

    fn u1(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.inner.u1(x, y)? - self.add_x * dot(x, x) + self.add_y * dot(y, y))
    }

    fn u2(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.inner.u2(x, y)? + self.add_x * dot(x, x) - self.add_y * dot(y, y))
    }
}

/// Strongly monotone surrogate of a merely monotone game.
#[derive(Debug, Clone)]
pub struct ReducedGame {
    pub game: GameSpec,
    /// Curvature moved into each player's term.
    pub add_x: f64,
    pub add_y: f64,
    /// Squared accuracy required of the surrogate solve.
    pub target: f64,
}

/// Surrogate with `add_x = min(eps/(4 D_X^2), L/2)` and likewise for `y`, so
/// that its moduli are `mu + min(eps/(2 D_X^2), L)` and `nu + min(eps/(2 D_Y^2), L)`.
pub fn reduce_monotone(game: &GameSpec, eps: f64) -> Result<ReducedGame> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let l = game.l();
    let (dx2, dy2) = (game.diameter_x().powi(2), game.diameter_y().powi(2));
    let add = |d2: f64| if d2 > 0.0 { (eps / (4.0 * d2)).min(0.5 * l) } else { 0.5 * l };
    let (add_x, add_y) = (add(dx2), add(dy2));
    let c = game.constants;
    let constants = GameConstants {
        l: l + 2.0 * add_x.max(add_y),
        mu: c.mu + 2.0 * add_x,
        nu: c.nu + 2.0 * add_y,
        delta: c.delta,
    };
    let oracle = Arc::new(CurvatureShift {
        inner: game.oracle().clone(),
        add_x,
        add_y,
    });
    let mut reduced = GameSpec::new(oracle, constants, game.x_set.clone(), game.y_set.clone())?
        .with_monotone_modulus(game.monotone_modulus + 2.0 * add_x.min(add_y));
    if let Some(s) = &game.structure {
        reduced = reduced.with_structure(BilinearStructure::new(
            s.coupling().clone(),
            s.coupling_norm(),
            s.curv_x + 2.0 * add_x,
            s.curv_y + 2.0 * add_y,
            s.lin_x.clone(),
            s.lin_y.clone(),
        )?)?;
    }
    if let Some((c1, c2)) = game.own_curvature {
        reduced = reduced.with_own_curvature(c1 + 2.0 * add_x, c2 + 2.0 * add_y);
    }
    let d_sq = dx2 + dy2;
    let target = eps * eps / (32.0 * l * l * d_sq.max(f64::MIN_POSITIVE));
    Ok(ReducedGame {
        game: reduced,
        add_x,
        add_y,
        target,
    })
}

#[derive(Debug, Clone)]
pub struct MonotoneReport {
    /// Approximate equilibrium after one projected ascent step per player.
    pub point: JointPoint,
    /// Deviation-gain bound of `point` in the surrogate game.
    pub surrogate_gap_bound: f64,
    pub reduced: ReducedGame,
    pub icl: IclReport,
}

/// Approximate equilibrium of a merely monotone game via a strongly monotone
/// surrogate solved to squared accuracy `eps^2 / (32 L^2 D^2)`.
pub fn solve_monotone(game: &GameSpec, eps: f64, opts: &IclOptions) -> Result<MonotoneReport> {
    let reduced = reduce_monotone(game, eps)?;
    let mut icl = solve_icl(&reduced.game, reduced.target, opts)?;
    let gamma = 1.0 / (std::f64::consts::SQRT_2 * reduced.game.l());
    let (point, bound) = extract_approx_ne(
        &reduced.game,
        &icl.solve.point,
        gamma,
        reduced.target.sqrt(),
        &mut icl.solve.ledger,
    )?;
    Ok(MonotoneReport {
        point,
        surrogate_gap_bound: bound,
        reduced,
        icl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_quadratic_known_ne, stackelberg_example};

    #[test]
    fn schedule_examples() {
        let s = schedule_params(0.5, 0.5, 0.0, 1.0, 1e-7, 2f64.sqrt(), 2f64.sqrt()).unwrap();
        assert_eq!(s.eta, 2.0);
        assert_eq!(s.theta, 0.5);
        assert_eq!(s.outer_iterations, 37);
        let s = schedule_params(0.1, 0.3, 0.4, 1.0, 1e-3, 1.0, 1.0).unwrap();
        assert!((s.eta - 2.5).abs() < 1e-15);
        assert!((s.theta - 0.1 / 0.5).abs() < 1e-15);
        assert!((s.eps_t - s.theta * 1e-3 / 10.0).abs() < 1e-18);
        assert!(schedule_params(0.0, 1.0, 0.0, 1.0, 1e-3, 1.0, 1.0).is_err());
    }

    #[test]
    fn subproblem_operator_matches_f_at_center() {
        let game = gen_quadratic_known_ne(5, 4, 0.3, 0.6, 0.2, 0.8, 3).unwrap();
        let mut ledger = QueryLedger::default();
        let z = game.initial_point().add_scaled(0.1, &game.known_ne.clone().unwrap());
        let sub = build_subproblem(&game, &z, 1.7, &mut ledger).unwrap();
        assert_eq!(ledger.g_queries, 1);
        let phi = sub.operator(&z, &mut ledger, QueryKind::H).unwrap();
        let f = game.operator_f(&z, &mut ledger).unwrap();
        assert!(phi.max_abs_diff(&f) <= 1e-12 * (1.0 + f.norm()));
    }

    #[test]
    fn icl_finds_stackelberg_instance_nash_point() {
        let game = stackelberg_example();
        let r = solve_icl(&game, 1e-13, &IclOptions::default()).unwrap();
        let ne = game.known_ne.clone().unwrap();
        assert!(r.solve.point.dist_sq(&ne).sqrt() < 1e-6, "{:?}", r.solve.point);
    }
}
