//! Bregman projection `P^f_C(x) = argmin { D_f(y, x) : y ∈ C }` and the
//! variational characterization used to certify it.
//!
//! Strategy by case:
//! - halfspace / hyperplane, any `f`: scalar dual search on `λ` with
//!   `z(λ) = ∇f*(∇f(x) - λa)` and `⟨a, z(λ)⟩ = b`;
//! - box with separable `f`: coordinatewise clamp (each coordinate of
//!   `D_f(·, x)` is a 1-D convex function minimized at `xᵢ`);
//! - simplex with entropy: normalization;
//! - simplex with squared or p-norm: a threshold in dual coordinates;
//! - everything else: projected gradient on `y ↦ D_f(y, x)` with the
//!   Euclidean projection onto `C` as inner oracle.

use crate::error::{Error, Result};
use crate::geometry::{LegendreFunction, Point};
use crate::linalg::{dist, dot, norm, sub};
use crate::sets::ConvexSet;
use crate::tol;

/// The generic solver stops once the projected-gradient step moves less than this.
const GENERIC_STOP: f64 = 1e-12;
/// Accepted stationarity when the generic solver stalls in roundoff.
const GENERIC_ACCEPT: f64 = 1e-8;
/// Doublings allowed when bracketing the dual multiplier.
const BRACKET_MAX_DOUBLINGS: usize = 1100;

pub fn bregman_project(f: &LegendreFunction, set: &ConvexSet, x: &Point) -> Result<Point> {
    f.check_interior(x)?;
    if x.dim() != set.dim() {
        return Err(Error::argument(format!(
            "point of dimension {} projected onto set of dimension {}",
            x.dim(),
            set.dim()
        )));
    }
    if set.contains(x, 0.0) {
        return Ok(x.clone());
    }
    match set {
        ConvexSet::Halfspace { a, b } => dual_search(f, x, a, *b, true),
        ConvexSet::Hyperplane { a, b } => dual_search(f, x, a, *b, false),
        ConvexSet::Box { lo, hi } if f.is_separable() => clamp_box(f, x, lo, hi),
        ConvexSet::Simplex { scale, .. } if *f == LegendreFunction::NegativeEntropy => {
            let total: f64 = x.iter().sum();
            Ok(Point(x.iter().map(|v| v * scale / total).collect()))
        }
        ConvexSet::Simplex { scale, .. }
            if matches!(f, LegendreFunction::SquaredNorm | LegendreFunction::PNorm { .. }) =>
        {
            simplex_threshold(f, x, *scale)
        }
        _ => projected_gradient(f, set, x),
    }
}

/// Simplex projection for separable `f` with `dom f = R^d` and `∇f*(0) = 0`:
/// `yᵢ = max(0, ∇f*(∇f(x)ᵢ - ν))`, with the threshold `ν` found by bisection on
/// the nonincreasing map `ν ↦ Σ yᵢ(ν)`.
fn simplex_threshold(f: &LegendreFunction, x: &Point, scale: f64) -> Result<Point> {
    let g = f.gradient(x)?;
    let at = |nu: f64| -> Vec<f64> {
        let shifted: Vec<f64> = g.iter().map(|v| v - nu).collect();
        f.conjugate_gradient_raw(&shifted)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect()
    };
    let total = |nu: f64| at(nu).iter().sum::<f64>();
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut width = 1.0;
    while total(hi - width) < scale {
        width *= 2.0;
        if !width.is_finite() {
            return Err(Error::Infeasible("simplex threshold search diverged".into()));
        }
    }
    let (mut lo, mut hi) = (hi - width, hi);
    for _ in 0..tol::DUAL_SEARCH_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) >= scale {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = at(lo);
    let s: f64 = y.iter().sum();
    Ok(Point(y.iter().map(|v| v * scale / s).collect()))
}

fn clamp_box(f: &LegendreFunction, x: &Point, lo: &[f64], hi: &[f64]) -> Result<Point> {
    let z = Point(
        x.iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect(),
    );
    f.check_interior(&z)
        .map_err(|_| Error::Infeasible("box does not meet the interior of dom f".into()))?;
    Ok(z)
}

/// Signed constraint value `⟨a, ∇f*(g - λa)⟩ - b`, robust to overflow in `∇f*`.
fn constraint_at(f: &LegendreFunction, g: &[f64], a: &[f64], b: f64, lambda: f64) -> f64 {
    let shifted: Vec<f64> = g.iter().zip(a).map(|(gi, ai)| gi - lambda * ai).collect();
    let z = f.conjugate_gradient_raw(&shifted);
    let mut s = -b;
    for (zi, ai) in z.iter().zip(a) {
        if *ai != 0.0 {
            s += zi * ai;
        }
    }
    s
}

/// Halfspace (`inequality`) or hyperplane projection through the scalar dual.
///
/// `φ(λ) = ⟨a, ∇f*(∇f(x) - λa)⟩ - b` is nonincreasing in `λ`; the root is
/// bracketed by doubling, then refined by Newton steps safeguarded with bisection.
fn dual_search(f: &LegendreFunction, x: &Point, a: &[f64], b: f64, inequality: bool) -> Result<Point> {
    let g = f.gradient(x)?;
    let phi0 = constraint_at(f, &g, a, b, 0.0);
    if phi0 == 0.0 || (inequality && phi0 < 0.0) {
        return Ok(x.clone());
    }
    // Search in the direction that decreases |φ|.
    let dir = if phi0 > 0.0 { 1.0 } else { -1.0 };
    let phi = |t: f64| dir * constraint_at(f, &g, a, b, dir * t);

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut phi_hi = phi(hi);
    let mut doublings = 0;
    while phi_hi > 0.0 || phi_hi.is_nan() {
        lo = hi;
        hi *= 2.0;
        phi_hi = phi(hi);
        doublings += 1;
        if doublings > BRACKET_MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Infeasible(
                "constraint set does not meet the interior of dom f".into(),
            ));
        }
    }

    // Iterate to roundoff; the inner-solve tolerance is the acceptance bound at the cap.
    let target = tol::INNER_SOLVE * (1.0 + b.abs());
    let roundoff = 16.0 * f64::EPSILON * (1.0 + b.abs());
    let mut t = lo;
    let mut phi_t = phi(t);
    let mut width = hi - lo;
    for _ in 0..tol::DUAL_SEARCH_MAX_ITERS {
        if phi_t.abs() <= roundoff || hi - lo <= 4.0 * f64::EPSILON * hi {
            return finish_dual(f, &g, a, dir * t);
        }
        let shifted: Vec<f64> = g.iter().zip(a).map(|(gi, ai)| gi - dir * t * ai).collect();
        let slope = f.conjugate_curvature(&shifted, a);
        let newton = t + phi_t / slope;
        // Newton creeps near a singular curvature; bisect unless the bracket halved.
        let shrinking = hi - lo <= 0.5 * width;
        width = hi - lo;
        t = if shrinking && slope.is_finite() && slope > 0.0 && newton >= lo && newton <= hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        phi_t = phi(t);
        if phi_t > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
    }
    if phi_t.abs() <= target {
        return finish_dual(f, &g, a, dir * t);
    }
    Err(Error::Convergence {
        solver: "bregman dual search",
        iterations: tol::DUAL_SEARCH_MAX_ITERS,
        residual: phi_t.abs(),
    })
}

fn finish_dual(f: &LegendreFunction, g: &[f64], a: &[f64], lambda: f64) -> Result<Point> {
    let shifted: Vec<f64> = g.iter().zip(a).map(|(gi, ai)| gi - lambda * ai).collect();
    f.conjugate_gradient(&shifted)
        .map_err(|e| Error::Infeasible(format!("projection leaves the interior of dom f: {e}")))
}

/// Feasible starting point in `C ∩ int dom f`, pulled toward the set witness if needed.
fn interior_start(f: &LegendreFunction, set: &ConvexSet, x: &Point) -> Result<Point> {
    let p = set.euclidean_projection(x)?;
    if f.check_interior(&p).is_ok() {
        return Ok(p);
    }
    let w = set.witness();
    let mut t = 0.5;
    for _ in 0..60 {
        let y = Point(p.iter().zip(w.iter()).map(|(a, b)| t * a + (1.0 - t) * b).collect());
        if f.check_interior(&y).is_ok() && set.contains(&y, tol::MEMBERSHIP) {
            return Ok(y);
        }
        t *= 0.5;
    }
    Err(Error::Infeasible(
        "no starting point in the set and the interior of dom f".into(),
    ))
}

/// Projected gradient with Barzilai–Borwein steps. A step `s` is accepted when
/// `s⟨∇φ(y⁺) - ∇φ(y), y⁺ - y⟩ ≤ ‖y⁺ - y‖²` for `φ = D_f(·, x)`, a local
/// Lipschitz test that needs gradients only and so stays reliable after the
/// objective has stopped changing in floating point.
fn projected_gradient(f: &LegendreFunction, set: &ConvexSet, x: &Point) -> Result<Point> {
    let gx = f.gradient(x)?;
    let mut y = interior_start(f, set, x)?;
    let mut grad = sub(&f.gradient(&y)?, &gx);
    let mut step = 1.0;
    let mut stationarity = f64::INFINITY;

    for _ in 0..tol::PROJECTION_MAX_ITERS {
        let trial = set.euclidean_projection(&sub(&y, &grad))?;
        stationarity = dist(&trial, &y);
        if stationarity <= GENERIC_STOP * (1.0 + norm(&y)) {
            return Ok(y);
        }

        let mut accepted = None;
        let mut s = step;
        for _ in 0..80 {
            let cand: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - s * gi).collect();
            let cand = set.euclidean_projection(&cand)?;
            if f.check_interior(&cand).is_ok() {
                let cand_grad = sub(&f.gradient(&cand)?, &gx);
                let dy = sub(&cand, &y);
                if s * dot(&sub(&cand_grad, &grad), &dy) <= dot(&dy, &dy) {
                    accepted = Some((cand, cand_grad));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((next, next_grad)) = accepted else {
            break;
        };

        let dy = sub(&next, &y);
        let dg = sub(&next_grad, &grad);
        let curv = dot(&dy, &dg);
        step = if curv > 0.0 {
            (dot(&dy, &dy) / curv).clamp(1e-12, 1e12)
        } else {
            (2.0 * s).min(1e12)
        };
        let moved = dist(&next, &y);
        y = next;
        grad = next_grad;
        if moved <= f64::EPSILON * (1.0 + norm(&y)) {
            break;
        }
    }

    let trial = set.euclidean_projection(&sub(&y, &grad))?;
    stationarity = stationarity.min(dist(&trial, &y));
    if stationarity <= GENERIC_ACCEPT {
        Ok(y)
    } else {
        Err(Error::Convergence {
            solver: "bregman projected gradient",
            iterations: tol::PROJECTION_MAX_ITERS,
            residual: stationarity,
        })
    }
}

/// `max_y ⟨∇f(x) - ∇f(z), y - z⟩` over probes `y ∈ C`.
pub fn projection_vi_residual(
    f: &LegendreFunction,
    set: &ConvexSet,
    x: &Point,
    z: &Point,
    probes: &[Point],
) -> Result<f64> {
    if !set.contains(z, tol::PROJECTION_MEMBERSHIP) {
        return Err(Error::argument("candidate projection is not in the set"));
    }
    let dir = sub(&f.gradient(x)?, &f.gradient(z)?);
    let mut worst = f64::NEG_INFINITY;
    for y in probes {
        if !set.contains(y, tol::MEMBERSHIP) {
            return Err(Error::argument("probe point is not in the set"));
        }
        worst = worst.max(dot(&dir, &sub(y, z)));
    }
    Ok(worst)
}

/// `D_f(y, x) - D_f(y, P) - D_f(P, x)` with `P = P^f_C(x)`; nonnegative for `y ∈ C`.
pub fn pythagoras_gap(f: &LegendreFunction, set: &ConvexSet, x: &Point, y: &Point) -> Result<f64> {
    if !set.contains(y, tol::MEMBERSHIP) {
        return Err(Error::argument("comparison point is not in the set"));
    }
    let p = bregman_project(f, set, x)?;
    Ok(f.bregman_distance(y, x)? - f.bregman_distance(y, &p)? - f.bregman_distance(&p, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn close_vec(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn halfspace_euclidean_example() {
        let h = ConvexSet::halfspace(vec![1.0, 0.0], 1.0).unwrap();
        let z = bregman_project(&LegendreFunction::SquaredNorm, &h, &[2.0, 0.0].into()).unwrap();
        close_vec(&z, &[1.0, 0.0], 1e-12);
    }

    #[test]
    fn entropy_simplex_normalizes() {
        let s = ConvexSet::simplex(2, 1.0).unwrap();
        let f = LegendreFunction::NegativeEntropy;
        let x: Point = [1.0, 3.0].into();
        let z = bregman_project(&f, &s, &x).unwrap();
        close_vec(&z, &[0.25, 0.75], 1e-15);
        // KKT oracle: log(zᵢ/xᵢ) is constant across coordinates (single multiplier).
        let m0 = (z[0] / x[0]).ln();
        let m1 = (z[1] / x[1]).ln();
        assert!((m0 - m1).abs() < 1e-14);
    }

    #[test]
    fn members_are_fixed() {
        let sets = [
            ConvexSet::ball(vec![0.0, 0.0], 2.0).unwrap(),
            ConvexSet::cube(2, 0.0, 1.0).unwrap(),
            ConvexSet::halfspace(vec![1.0, 1.0], 3.0).unwrap(),
        ];
        let x: Point = [0.5, 0.5].into();
        for f in [LegendreFunction::SquaredNorm, LegendreFunction::NegativeEntropy] {
            for s in &sets {
                assert_eq!(bregman_project(&f, s, &x).unwrap(), x);
            }
        }
    }

    #[test]
    fn entropy_infeasible_halfspace() {
        // x₁ + x₂ ≤ -1 misses the positive orthant.
        let h = ConvexSet::halfspace(vec![1.0, 1.0], -1.0).unwrap();
        let r = bregman_project(&LegendreFunction::NegativeEntropy, &h, &[1.0, 1.0].into());
        assert!(matches!(r, Err(Error::Infeasible(_))));
        let b = ConvexSet::boxed(vec![-2.0, 0.5], vec![-1.0, 1.0]).unwrap();
        let r = bregman_project(&LegendreFunction::NegativeEntropy, &b, &[1.0, 1.0].into());
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn entropy_hyperplane_matches_multiplier_form() {
        // KL projection onto ⟨a, z⟩ = b has the form zᵢ = xᵢ exp(-λ aᵢ).
        let f = LegendreFunction::NegativeEntropy;
        let h = ConvexSet::hyperplane(vec![1.0, 2.0, -1.0], 1.5).unwrap();
        let x: Point = [0.4, 0.9, 1.3].into();
        let z = bregman_project(&f, &h, &x).unwrap();
        assert!(h.contains(&z, 1e-10));
        let lambdas: Vec<f64> = [0, 1, 2]
            .iter()
            .map(|&i| -(z[i] / x[i]).ln() / [1.0, 2.0, -1.0][i])
            .collect();
        assert!((lambdas[0] - lambdas[1]).abs() < 1e-9 && (lambdas[0] - lambdas[2]).abs() < 1e-9);
    }

    #[test]
    fn vi_residual_detects_non_projection() {
        let f = LegendreFunction::SquaredNorm;
        let c = ConvexSet::cube(2, -1.0, 1.0).unwrap();
        let x: Point = [3.0, 0.0].into();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let probes = c.probes(&x, 2.0, 32, 32, &mut rng).unwrap();
        let z = bregman_project(&f, &c, &x).unwrap();
        assert!(projection_vi_residual(&f, &c, &x, &z, &probes).unwrap() <= 1e-7);
        let inside: Point = [0.2, 0.3].into();
        assert!(projection_vi_residual(&f, &c, &inside, &inside, &probes).unwrap() <= 1e-12);
        // (0, 0) is not the projection of (3, 0): the corner (1, 1) witnesses ⟨x - z, y - z⟩ = 3 > 0.
        let wrong: Point = [0.0, 0.0].into();
        assert!(projection_vi_residual(&f, &c, &x, &wrong, &probes).unwrap() > 1.0);
        let outside = vec![Point::from([5.0, 5.0])];
        assert!(matches!(
            projection_vi_residual(&f, &c, &x, &z, &outside),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn pythagoras_halfspace_examples() {
        let f = LegendreFunction::SquaredNorm;
        let h = ConvexSet::halfspace(vec![1.0, 0.0], 1.0).unwrap();
        let x: Point = [3.0, 1.0].into();
        // On the boundary face through P = (1, 1) the gap is exactly zero.
        let gap = pythagoras_gap(&f, &h, &x, &[1.0, -4.0].into()).unwrap();
        assert!(gap.abs() < 1e-12);
        // Strictly inside: ½‖y-x‖² - ½‖y-P‖² - ½‖P-x‖² = ⟨x-P, P-y⟩ = 2·(1-(-1)) = 4.
        let gap = pythagoras_gap(&f, &h, &x, &[-1.0, 0.0].into()).unwrap();
        assert!((gap - 4.0).abs() < 1e-12);
        let inside: Point = [0.0, 1.0].into();
        assert_eq!(pythagoras_gap(&f, &h, &inside, &[-2.0, 0.5].into()).unwrap(), 0.0);
    }

    #[test]
    fn generic_path_handles_entropy_ball() {
        let f = LegendreFunction::NegativeEntropy;
        let b = ConvexSet::ball(vec![1.0, 1.0], 0.5).unwrap();
        let x: Point = [3.0, 0.2].into();
        let z = bregman_project(&f, &b, &x).unwrap();
        assert!(b.contains(&z, 1e-8));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let probes = b.probes(&z, 1.0, 64, 64, &mut rng).unwrap();
        assert!(projection_vi_residual(&f, &b, &x, &z, &probes).unwrap() <= 1e-7);
    }
}
