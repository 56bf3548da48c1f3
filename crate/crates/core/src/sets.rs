//! Compact convex feasible sets with Euclidean projection, a linear
//! minimization oracle and exact diameters.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::vecmat::{dot, norm, DenseVector};

/// Points this close to a set (coordinatewise / in norm) count as feasible and
/// are returned unchanged by [`FeasibleSet::project`].
pub const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// Probability simplex `{w >= 0, sum w = 1}` in `dim` coordinates.
    Simplex { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Product(Vec<FeasibleSet>),
}

impl FeasibleSet {
    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("simplex dimension must be >= 1".into()));
        }
        Ok(FeasibleSet::Simplex { dim })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidParameter("ball dimension must be >= 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
        }
        DenseVector::new(center.clone())?;
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidParameter("box dimension must be >= 1".into()));
        }
        DenseVector::new(lo.clone())?;
        DenseVector::new(hi.clone())?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter("box requires lo <= hi coordinatewise".into()));
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    pub fn product(parts: Vec<FeasibleSet>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("product of zero sets".into()));
        }
        Ok(FeasibleSet::Product(parts))
    }

    pub fn dimension(&self) -> usize {
        match self {
            FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Product(parts) => parts.iter().map(FeasibleSet::dimension).sum(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Simplex { dim } => {
                if *dim >= 2 {
                    std::f64::consts::SQRT_2
                } else {
                    0.0
                }
            }
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
            }
            FeasibleSet::Product(parts) => {
                parts.iter().map(|p| p.diameter().powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// A canonical interior-ish starting point: the barycenter of the simplex,
    /// the ball center, the box midpoint.
    pub fn center(&self) -> DenseVector {
        let mut out = Vec::with_capacity(self.dimension());
        self.center_into(&mut out);
        DenseVector::from_raw(out)
    }

    fn center_into(&self, out: &mut Vec<f64>) {
        match self {
            FeasibleSet::Simplex { dim } => out.extend(std::iter::repeat(1.0 / *dim as f64).take(*dim)),
            FeasibleSet::Ball { center, .. } => out.extend_from_slice(center),
            FeasibleSet::Box { lo, hi } => out.extend(lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h))),
            FeasibleSet::Product(parts) => parts.iter().for_each(|p| p.center_into(out)),
        }
    }

    pub fn contains(&self, v: &[f64], slack: f64) -> bool {
        if v.len() != self.dimension() {
            return false;
        }
        match self {
            FeasibleSet::Simplex { .. } => {
                v.iter().all(|&e| e >= -slack) && (v.iter().sum::<f64>() - 1.0).abs() <= slack
            }
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = v.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                d <= radius + slack
            }
            FeasibleSet::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&e, (&l, &h))| e >= l - slack && e <= h + slack),
            FeasibleSet::Product(parts) => {
                let mut off = 0;
                parts.iter().all(|p| {
                    let d = p.dimension();
                    let ok = p.contains(&v[off..off + d], slack);
                    off += d;
                    ok
                })
            }
        }
    }

    /// Draws a feasible point; the distribution only needs to cover the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DenseVector {
        let mut out = Vec::with_capacity(self.dimension());
        self.sample_into(rng, &mut out);
        DenseVector::from_raw(out)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            FeasibleSet::Simplex { dim } => {
                // normalized exponentials: uniform on the simplex
                let e: Vec<f64> = (0..*dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                out.extend(e.iter().map(|v| v / s));
            }
            FeasibleSet::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                out.extend(center.iter().zip(&dir).map(|(c, v)| c + r * v / n));
            }
            FeasibleSet::Box { lo, hi } => {
                out.extend(lo.iter().zip(hi).map(|(&l, &h)| l + (h - l) * rng.gen::<f64>()));
            }
            FeasibleSet::Product(parts) => parts.iter().for_each(|p| p.sample_into(rng, out)),
        }
    }

    /// Euclidean projection.
    pub fn project(&self, v: &[f64]) -> Result<DenseVector> {
        check_dim("project", self.dimension(), v.len())?;
        let mut out = vec![0.0; v.len()];
        self.project_into(v, &mut out);
        Ok(DenseVector::from_raw(out))
    }

    /// Unchecked projection writing into `out`.
    pub fn project_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dimension());
        debug_assert_eq!(out.len(), v.len());
        match self {
            FeasibleSet::Simplex { .. } => project_simplex(v, out),
            FeasibleSet::Ball { center, radius } => {
                let d: f64 = v.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                if d <= radius * (1.0 + FEASIBILITY_SLACK) {
                    out.copy_from_slice(v);
                } else {
                    let s = radius / d;
                    for ((o, a), c) in out.iter_mut().zip(v).zip(center) {
                        *o = c + s * (a - c);
                    }
                }
            }
            FeasibleSet::Box { lo, hi } => {
                for (((o, &a), &l), &h) in out.iter_mut().zip(v).zip(lo).zip(hi) {
                    *o = a.clamp(l, h);
                }
            }
            FeasibleSet::Product(parts) => {
                let mut off = 0;
                for p in parts {
                    let d = p.dimension();
                    p.project_into(&v[off..off + d], &mut out[off..off + d]);
                    off += d;
                }
            }
        }
    }

    /// `argmin_{w in S} <c, w>`, ties broken toward the lowest coordinate index.
    pub fn lmo(&self, c: &[f64]) -> Result<DenseVector> {
        check_dim("lmo", self.dimension(), c.len())?;
        let mut out = vec![0.0; c.len()];
        self.lmo_into(c, &mut out);
        Ok(DenseVector::from_raw(out))
    }

    pub fn lmo_into(&self, c: &[f64], out: &mut [f64]) {
        match self {
            FeasibleSet::Simplex { .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[argmin_lowest(c)] = 1.0;
            }
            FeasibleSet::Ball { center, radius } => {
                let nc = norm(c);
                if nc == 0.0 {
                    out.copy_from_slice(center);
                } else {
                    for ((o, &ci), &ce) in out.iter_mut().zip(c).zip(center) {
                        *o = ce - radius * ci / nc;
                    }
                }
            }
            FeasibleSet::Box { lo, hi } => {
                for (((o, &ci), &l), &h) in out.iter_mut().zip(c).zip(lo).zip(hi) {
                    *o = if ci < 0.0 { h } else { l };
                }
            }
            FeasibleSet::Product(parts) => {
                let mut off = 0;
                for p in parts {
                    let d = p.dimension();
                    p.lmo_into(&c[off..off + d], &mut out[off..off + d]);
                    off += d;
                }
            }
        }
    }

    /// `min_{w in S} <c, w>` without materializing the minimizer.
    pub fn support_min(&self, c: &[f64]) -> f64 {
        match self {
            FeasibleSet::Simplex { .. } => c[argmin_lowest(c)],
            FeasibleSet::Ball { center, radius } => dot(c, center) - radius * norm(c),
            FeasibleSet::Box { lo, hi } => c
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&ci, (&l, &h))| if ci < 0.0 { ci * h } else { ci * l })
                .sum(),
            FeasibleSet::Product(parts) => {
                let mut off = 0;
                parts
                    .iter()
                    .map(|p| {
                        let d = p.dimension();
                        let s = p.support_min(&c[off..off + d]);
                        off += d;
                        s
                    })
                    .sum()
            }
        }
    }
}

fn argmin_lowest(c: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in c.iter().enumerate().skip(1) {
        if v < c[best] {
            best = i;
        }
    }
    best
}

/// Sort-and-threshold projection onto the probability simplex.
fn project_simplex(v: &[f64], out: &mut [f64]) {
    let n = v.len();
    if v.iter().all(|&e| e >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= FEASIBILITY_SLACK {
        out.copy_from_slice(v);
        return;
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    debug_assert!(n > 0);
    for (o, &e) in out.iter_mut().zip(v) {
        *o = (e - tau).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_examples() {
        let s = FeasibleSet::simplex(2).unwrap();
        assert_eq!(s.project(&[0.5, 0.5]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(s.project(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn simplex_projection_matches_grid_search() {
        // brute force over a fine grid of the 1-simplex
        let s = FeasibleSet::simplex(2).unwrap();
        for v in [[2.0, 0.0], [0.3, -0.4], [-1.0, -3.0], [0.9, 0.9]] {
            let p = s.project(&v).unwrap();
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=100_000 {
                let t = k as f64 / 100_000.0;
                let d = (t - v[0]).powi(2) + (1.0 - t - v[1]).powi(2);
                if d < best.0 {
                    best = (d, t);
                }
            }
            assert!((p[0] - best.1).abs() <= 1e-5, "{v:?} -> {p:?} vs {}", best.1);
        }
    }

    #[test]
    fn ball_projection_and_lmo() {
        let b = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let r = 2.5;
        let b = FeasibleSet::ball(vec![0.0, 0.0, 0.0], r).unwrap();
        let c = [1.0, -2.0, 2.0];
        let w = b.lmo(&c).unwrap();
        for i in 0..3 {
            assert!((w[i] + r * c[i] / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lmo_examples() {
        let s = FeasibleSet::simplex(2).unwrap();
        assert_eq!(s.lmo(&[1.0, 2.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(s.lmo(&[2.0, 2.0]).unwrap().as_slice(), &[1.0, 0.0]);
        let bx = FeasibleSet::boxed(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let w = bx.lmo(&[-1.0, 3.0]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
        // brute force over the four corners
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [1.0, 2.0]];
        let best = corners
            .iter()
            .map(|c| -c[0] + 3.0 * c[1])
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, bx.support_min(&[-1.0, 3.0]));
    }

    #[test]
    fn diameters() {
        assert_eq!(FeasibleSet::ball(vec![0.0; 3], 1.5).unwrap().diameter(), 3.0);
        for n in [2, 3, 10] {
            let s = FeasibleSet::simplex(n).unwrap();
            // max distance over vertex pairs
            let mut best: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut ei = vec![0.0; n];
                    let mut ej = vec![0.0; n];
                    ei[i] = 1.0;
                    ej[j] = 1.0;
                    best = best.max(crate::vecmat::dist_sq(&ei, &ej).sqrt());
                }
            }
            assert_eq!(s.diameter(), best);
        }
        let p = FeasibleSet::product(vec![
            FeasibleSet::simplex(4).unwrap(),
            FeasibleSet::simplex(6).unwrap(),
        ])
        .unwrap();
        assert!((p.diameter() - 2.0).abs() < 1e-15);
        assert_eq!(FeasibleSet::simplex(1).unwrap().diameter(), 0.0);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(FeasibleSet::simplex(0).is_err());
        assert!(FeasibleSet::ball(vec![0.0], 0.0).is_err());
        assert!(FeasibleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::simplex(3).unwrap().project(&[1.0]).is_err());
        assert!(FeasibleSet::simplex(3).unwrap().lmo(&[1.0]).is_err());
    }

    #[test]
    fn product_projection_splits() {
        let p = FeasibleSet::product(vec![
            FeasibleSet::simplex(2).unwrap(),
            FeasibleSet::boxed(vec![-1.0], vec![0.0]).unwrap(),
        ])
        .unwrap();
        let w = p.project(&[2.0, 0.0, 5.0]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
        assert!(p.contains(&w, 0.0));
    }
}
