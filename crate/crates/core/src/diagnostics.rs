//! Equilibrium residuals: the potential gap, unilateral deviation gains, and
//! the leader-follower dynamic on [`stackelberg_example`].
//!
//! [`stackelberg_example`]: crate::instances::stackelberg_example

use crate::error::{Error, Result};
use crate::game::{GameSpec, JointPoint};
use crate::instances::stackelberg_example;
use crate::sets::FeasibleSet;
use crate::vecmat::DenseVector;

/// Default number of ascent steps inside [`potential_gap`].
pub const DEFAULT_ASCENT_STEPS: usize = 500;

const DEMO_MAX_STEPS: usize = 100_000;

/// How a residual was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMethod {
    /// Closed-form best responses from isotropic own curvature.
    ExactLmo,
    /// Projected gradient ascent with a Frank-Wolfe upper bound.
    ProjectedAscent,
}

/// Bracket on the potential `max_w g(z) - g(w) + h(x, w_y) - h(w_x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBounds {
    /// Value at the best ascent iterate; never negative since `w = z` is a candidate.
    pub lower: f64,
    /// Lower bound plus the Frank-Wolfe residual at the best iterate.
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub delta_value: f64,
    pub delta_upper: f64,
    pub deviation_gain: f64,
    pub method: ResidualMethod,
}

fn require_values(game: &GameSpec) -> Result<()> {
    if game.has_values() {
        Ok(())
    } else {
        Err(Error::MissingValueOracle("u1/u2"))
    }
}

fn feasible(game: &GameSpec, z: &JointPoint) -> Result<()> {
    if game.is_feasible(z) {
        Ok(())
    } else {
        Err(Error::Precondition("point is not feasible".into()))
    }
}

/// `min_{w in S} <c, w>` over the joint set.
fn joint_support_min(game: &GameSpec, c: &JointPoint) -> f64 {
    game.x_set.support_min(&c.x) + game.y_set.support_min(&c.y)
}

/// Objective of the potential at `w` and its gradient in `w`.
fn potential_at(game: &GameSpec, z: &JointPoint, g_z: f64, w: &JointPoint) -> Result<(f64, JointPoint)> {
    let at_w = JointPoint::new(w.x.clone(), w.y.clone());
    let wx_y = JointPoint::new(w.x.clone(), z.y.clone());
    let x_wy = JointPoint::new(z.x.clone(), w.y.clone());
    let value = g_z - game.g_value(&at_w)? + game.h_value(&x_wy)? - game.h_value(&wx_y)?;

    let [g1x_w, g1y_w, g2x_w, g2y_w] = game.utility_gradients(&at_w)?;
    let [g1x_a, _, g2x_a, _] = game.utility_gradients(&wx_y)?;
    let [_, g1y_b, _, g2y_b] = game.utility_gradients(&x_wy)?;
    // d/dw_x: -grad_x g(w) - grad_x h(w_x, y); d/dw_y: -grad_y g(w) + grad_y h(x, w_y)
    let gx: Vec<f64> = (0..w.x.len())
        .map(|i| 0.5 * (g1x_w[i] + g2x_w[i]) - 0.5 * (g2x_a[i] - g1x_a[i]))
        .collect();
    let gy: Vec<f64> = (0..w.y.len())
        .map(|j| 0.5 * (g1y_w[j] + g2y_w[j]) + 0.5 * (g2y_b[j] - g1y_b[j]))
        .collect();
    Ok((value, JointPoint::new(DenseVector::from_raw(gx), DenseVector::from_raw(gy))))
}

/// Brackets the potential at `z` by `steps` iterations of projected
/// gradient ascent from `z`. The maximized function is concave for every
/// monotone game with a convex coupling part, so the Frank-Wolfe residual
/// makes `upper` a valid bound.
pub fn potential_gap(game: &GameSpec, z: &JointPoint, steps: usize) -> Result<PotentialBounds> {
    require_values(game)?;
    feasible(game, z)?;
    let g_z = game.g_value(z)?;
    let step = 1.0 / (game.l() + game.delta()).max(f64::MIN_POSITIVE);

    let mut w = z.clone();
    let (mut best_val, mut best_grad) = potential_at(game, z, g_z, &w)?;
    let mut best = w.clone();
    let mut grad = best_grad.clone();
    for _ in 0..steps {
        w = game.project(&w.add_scaled(step, &grad));
        let (val, g) = potential_at(game, z, g_z, &w)?;
        grad = g;
        if val > best_val {
            best_val = val;
            best_grad = grad.clone();
            best = w.clone();
        }
    }
    // max_{v in S} <grad, v - best>
    let fw = -joint_support_min(game, &best_grad.scaled(-1.0)) - best_grad.dot(&best);
    let lower = best_val.max(0.0);
    Ok(PotentialBounds {
        lower,
        upper: best_val + fw.max(0.0),
    })
}

/// Best response of one player whose utility is concave quadratic with
/// isotropic curvature `c` in its own variable; `grad` is that utility's
/// own gradient at `own`.
fn quadratic_best_response(set: &FeasibleSet, own: &[f64], grad: &[f64], c: f64) -> DenseVector {
    let n = own.len();
    let mut out = vec![0.0; n];
    if c > 0.0 {
        let target: Vec<f64> = (0..n).map(|i| own[i] + grad[i] / c).collect();
        set.project_into(&target, &mut out);
    } else {
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        set.lmo_into(&neg, &mut out);
    }
    DenseVector::from_raw(out)
}

/// Projected gradient ascent on a concave `value` over `set`.
fn ascend(
    set: &FeasibleSet,
    start: &DenseVector,
    step: f64,
    steps: usize,
    value: &dyn Fn(&DenseVector) -> Result<f64>,
    grad: &dyn Fn(&DenseVector) -> Result<Vec<f64>>,
) -> Result<f64> {
    let mut w = start.clone();
    let mut best = value(&w)?;
    let mut moved = vec![0.0; w.len()];
    for _ in 0..steps {
        let g = grad(&w)?;
        let target: Vec<f64> = (0..w.len()).map(|i| w[i] + step * g[i]).collect();
        set.project_into(&target, &mut moved);
        w = DenseVector::from_raw(moved.clone());
        best = best.max(value(&w)?);
    }
    Ok(best)
}

/// Sum of the two players' largest unilateral improvements at `z`.
///
/// Exact when the game declares isotropic own curvature; otherwise a lower
/// estimate from [`DEFAULT_ASCENT_STEPS`] projected ascent steps per player.
pub fn deviation_gain(game: &GameSpec, z: &JointPoint) -> Result<(f64, ResidualMethod)> {
    require_values(game)?;
    feasible(game, z)?;
    let u1 = game.u1(z)?;
    let u2 = game.u2(z)?;
    if let Some((c1, c2)) = game.own_curvature {
        let [g1x, _, _, g2y] = game.utility_gradients(z)?;
        let bx = quadratic_best_response(&game.x_set, &z.x, &g1x, c1);
        let by = quadratic_best_response(&game.y_set, &z.y, &g2y, c2);
        let gain_x = game.u1(&JointPoint::new(bx, z.y.clone()))? - u1;
        let gain_y = game.u2(&JointPoint::new(z.x.clone(), by))? - u2;
        return Ok((gain_x.max(0.0) + gain_y.max(0.0), ResidualMethod::ExactLmo));
    }
    let step = 1.0 / game.l();
    let with_x = |x: &DenseVector| JointPoint::new(x.clone(), z.y.clone());
    let with_y = |y: &DenseVector| JointPoint::new(z.x.clone(), y.clone());
    let best_x = ascend(
        &game.x_set,
        &z.x,
        step,
        DEFAULT_ASCENT_STEPS,
        &|x| game.u1(&with_x(x)),
        &|x| Ok(game.utility_gradients(&with_x(x))?[0].clone().into_vec()),
    )?;
    let best_y = ascend(
        &game.y_set,
        &z.y,
        step,
        DEFAULT_ASCENT_STEPS,
        &|y| game.u2(&with_y(y)),
        &|y| Ok(game.utility_gradients(&with_y(y))?[3].clone().into_vec()),
    )?;
    Ok(((best_x - u1).max(0.0) + (best_y - u2).max(0.0), ResidualMethod::ProjectedAscent))
}

/// Potential bracket and deviation gain at `z`.
pub fn gap_report(game: &GameSpec, z: &JointPoint, steps: usize) -> Result<GapReport> {
    let bounds = potential_gap(game, z, steps)?;
    let (gain, method) = deviation_gain(game, z)?;
    Ok(GapReport {
        delta_value: bounds.lower,
        delta_upper: bounds.upper,
        deviation_gain: gain,
        method,
    })
}

/// Leader-follower dynamic on [`stackelberg_example`]: `y` best-responds
/// in closed form and `x` minimizes `-u1(x, y(x))` by projected gradient.
/// Returns once a step moves less than `tol / 10`.
///
/// [`stackelberg_example`]: crate::instances::stackelberg_example
pub fn stackelberg_demo(tol: f64) -> Result<JointPoint> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let game = stackelberg_example();
    let follower = |x: &[f64]| (x[1] / 4.0 - 1.0).clamp(-1.0, 0.0);
    // Hessian of the leader objective is [[1, -1/8], [-1/8, 1]].
    let step = 1.0 / 1.125;
    let mut x = game.x_set.center().into_vec();
    let mut next = vec![0.0; 2];
    let mut moved = f64::INFINITY;
    for _ in 0..DEMO_MAX_STEPS {
        let y = [follower(&x)];
        let interior = (-1.0..0.0).contains(&(x[1] / 4.0 - 1.0));
        let gx = game.oracle().grad_u1_x(&x, &y);
        let gy = game.oracle().grad_u1_y(&x, &y)[0];
        let dy = if interior { 0.25 } else { 0.0 };
        let grad = [-gx[0], -gx[1] - gy * dy];
        let target = [x[0] - step * grad[0], x[1] - step * grad[1]];
        game.x_set.project_into(&target, &mut next);
        moved = ((next[0] - x[0]).powi(2) + (next[1] - x[1]).powi(2)).sqrt();
        x.copy_from_slice(&next);
        if moved < 0.1 * tol {
            let y = follower(&x);
            return JointPoint::from_vecs(x, vec![y]);
        }
    }
    Err(Error::NoConvergence {
        estimate: moved,
        iterations: DEMO_MAX_STEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{matching_pennies, STACKELBERG_LEADER, STACKELBERG_NASH};

    #[test]
    fn demo_reaches_leader_point() {
        let z = stackelberg_demo(1e-10).unwrap();
        let got = [z.x[0], z.x[1], z.y[0]];
        for (g, w) in got.iter().zip(STACKELBERG_LEADER) {
            assert!((g - w).abs() < 1e-8, "{got:?}");
        }
        let d: f64 = got.iter().zip(STACKELBERG_NASH).map(|(g, n)| (g - n).powi(2)).sum();
        assert!(d.sqrt() > 1e-2);
    }

    #[test]
    fn nash_point_has_no_gap() {
        let game = stackelberg_example();
        let z = game.known_ne.clone().unwrap();
        let r = gap_report(&game, &z, DEFAULT_ASCENT_STEPS).unwrap();
        assert!(r.delta_upper <= 1e-8, "{r:?}");
        assert!(r.deviation_gain <= 1e-10, "{r:?}");
    }

    #[test]
    fn pennies_center_is_equilibrium() {
        let game = matching_pennies(0.0, 0.0).unwrap().to_game().unwrap();
        let z = game.initial_point();
        let (gain, method) = deviation_gain(&game, &z).unwrap();
        assert_eq!(method, ResidualMethod::ExactLmo);
        assert!(gain.abs() < 1e-15);
    }
}
