//! Closed convex subsets of `R^d`: membership, Euclidean projection, witnesses
//! and probe sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{all_finite, dist, dot, norm};
use crate::tol;

/// Dykstra's alternating projection stops when a full cycle moves less than this.
const DYKSTRA_TOL: f64 = 1e-14;
const DYKSTRA_MAX_CYCLES: usize = 50_000;
/// Box corners are enumerated as probe vertices up to this dimension.
const MAX_CORNER_DIM: usize = 10;

/// A nonempty closed convex set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    /// `{x : ⟨a, x⟩ ≤ b}`
    Halfspace { a: Vec<f64>, b: f64 },
    /// `{x : ⟨a, x⟩ = b}`
    Hyperplane { a: Vec<f64>, b: f64 },
    /// `{x : lo ≤ x ≤ hi}`; `lo = hi` in a coordinate pins it.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : ‖x - center‖ ≤ radius}`
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x ≥ 0 : Σ xᵢ = scale}`
    Simplex { dim: usize, scale: f64 },
    /// Finite intersection; `witness` is a common point, found by Dykstra if omitted.
    Intersection {
        sets: Vec<ConvexSet>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Point>,
    },
}

impl ConvexSet {
    pub fn halfspace(a: Vec<f64>, b: f64) -> Result<Self> {
        ConvexSet::Halfspace { a, b }.validated()
    }

    pub fn hyperplane(a: Vec<f64>, b: f64) -> Result<Self> {
        ConvexSet::Hyperplane { a, b }.validated()
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        ConvexSet::Box { lo, hi }.validated()
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; d], vec![hi; d])
    }

    /// The single point `p`, as a degenerate box.
    pub fn singleton(p: &[f64]) -> Result<Self> {
        Self::boxed(p.to_vec(), p.to_vec())
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        ConvexSet::Ball { center, radius }.validated()
    }

    pub fn simplex(dim: usize, scale: f64) -> Result<Self> {
        ConvexSet::Simplex { dim, scale }.validated()
    }

    pub fn intersection(sets: Vec<ConvexSet>, witness: Option<Point>) -> Result<Self> {
        ConvexSet::Intersection { sets, witness }.validated()
    }

    /// Checks structural invariants and fills in a missing intersection witness.
    pub fn validated(self) -> Result<Self> {
        let bad = |m: &str| Err(Error::argument(m.to_string()));
        match self {
            ConvexSet::Halfspace { ref a, b } | ConvexSet::Hyperplane { ref a, b } => {
                if a.is_empty() || !all_finite(a) || !b.is_finite() {
                    return bad("halfspace/hyperplane needs finite nonempty normal");
                }
                if norm(a) == 0.0 {
                    return bad("halfspace/hyperplane normal must be nonzero");
                }
                Ok(self)
            }
            ConvexSet::Box { ref lo, ref hi } => {
                if lo.is_empty() || lo.len() != hi.len() || !all_finite(lo) || !all_finite(hi) {
                    return bad("box bounds must be finite with equal nonzero length");
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::Infeasible("box with lo > hi is empty".into()));
                }
                Ok(self)
            }
            ConvexSet::Ball { ref center, radius } => {
                if center.is_empty() || !all_finite(center) || !(radius > 0.0 && radius.is_finite()) {
                    return bad("ball needs a finite center and radius > 0");
                }
                Ok(self)
            }
            ConvexSet::Simplex { dim, scale } => {
                if dim == 0 || !(scale > 0.0 && scale.is_finite()) {
                    return bad("simplex needs dim >= 1 and scale > 0");
                }
                Ok(self)
            }
            ConvexSet::Intersection { sets, witness } => {
                if sets.is_empty() {
                    return bad("intersection of zero sets");
                }
                let sets = sets.into_iter().map(ConvexSet::validated).collect::<Result<Vec<_>>>()?;
                let d = sets[0].dim();
                if sets.iter().any(|s| s.dim() != d) {
                    return bad("intersection members differ in dimension");
                }
                let witness = match witness {
                    Some(w) => w,
                    None => dykstra(&sets, &sets[0].witness())?,
                };
                if witness.dim() != d || !sets.iter().all(|s| s.contains(&witness, tol::MEMBERSHIP)) {
                    return Err(Error::Infeasible("intersection witness is not a common point".into()));
                }
                Ok(ConvexSet::Intersection {
                    sets,
                    witness: Some(witness),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { a, .. } | ConvexSet::Hyperplane { a, .. } => a.len(),
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Simplex { dim, .. } => *dim,
            ConvexSet::Intersection { sets, .. } => sets[0].dim(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::Halfspace { .. } => false,
            ConvexSet::Hyperplane { a, .. } => a.len() == 1,
            ConvexSet::Box { .. } | ConvexSet::Ball { .. } | ConvexSet::Simplex { .. } => true,
            ConvexSet::Intersection { sets, .. } => sets.iter().any(ConvexSet::is_bounded),
        }
    }

    /// Membership with additive tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || !all_finite(x) {
            return false;
        }
        match self {
            ConvexSet::Halfspace { a, b } => dot(a, x) <= b + tol,
            ConvexSet::Hyperplane { a, b } => (dot(a, x) - b).abs() <= tol,
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConvexSet::Ball { center, radius } => dist(x, center) <= radius + tol,
            ConvexSet::Simplex { scale, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - scale).abs() <= tol
            }
            ConvexSet::Intersection { sets, .. } => sets.iter().all(|s| s.contains(x, tol)),
        }
    }

    /// A point of the set; relatively interior where the set has one.
    pub fn witness(&self) -> Point {
        match self {
            ConvexSet::Halfspace { a, b } => {
                // Strictly inside, one unit of normal length past the boundary.
                let aa = dot(a, a);
                Point(a.iter().map(|ai| ai * (b - aa.sqrt()) / aa).collect())
            }
            ConvexSet::Hyperplane { a, b } => {
                let aa = dot(a, a);
                Point(a.iter().map(|ai| ai * b / aa).collect())
            }
            ConvexSet::Box { lo, hi } => Point(lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()),
            ConvexSet::Ball { center, .. } => Point(center.clone()),
            ConvexSet::Simplex { dim, scale } => Point(vec![scale / *dim as f64; *dim]),
            ConvexSet::Intersection { sets, witness } => witness.clone().unwrap_or_else(|| sets[0].witness()),
        }
    }

    /// Extreme points for boxes (up to dimension 10) and simplices.
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            ConvexSet::Box { lo, hi } if lo.len() <= MAX_CORNER_DIM => {
                let d = lo.len();
                let mut out: Vec<Point> = Vec::new();
                for mask in 0u32..(1 << d) {
                    let v: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
                    if !out.iter().any(|p| p.0 == v) {
                        out.push(Point(v));
                    }
                }
                out
            }
            ConvexSet::Simplex { dim, scale } => (0..*dim)
                .map(|i| {
                    let mut v = vec![0.0; *dim];
                    v[i] = *scale;
                    Point(v)
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// A length scale for probing: the set's diameter if bounded, else `fallback`.
    pub fn extent(&self, fallback: f64) -> f64 {
        match self {
            ConvexSet::Box { lo, hi } => dist(lo, hi).max(1e-3),
            ConvexSet::Ball { radius, .. } => 2.0 * radius,
            ConvexSet::Simplex { scale, .. } => scale * std::f64::consts::SQRT_2,
            ConvexSet::Intersection { sets, .. } => sets
                .iter()
                .filter(|s| s.is_bounded())
                .map(|s| s.extent(fallback))
                .fold(fallback, f64::min),
            _ => fallback,
        }
    }

    /// Euclidean (nearest-point) projection.
    pub fn euclidean_projection(&self, x: &[f64]) -> Result<Point> {
        if x.len() != self.dim() {
            return Err(Error::argument(format!(
                "point of dimension {} projected onto set of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(match self {
            ConvexSet::Halfspace { a, b } => {
                let excess = dot(a, x) - b;
                if excess <= 0.0 {
                    Point(x.to_vec())
                } else {
                    shift_along(x, a, excess)
                }
            }
            ConvexSet::Hyperplane { a, b } => shift_along(x, a, dot(a, x) - b),
            ConvexSet::Box { lo, hi } => Point(
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (l, h))| v.clamp(*l, *h))
                    .collect(),
            ),
            ConvexSet::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    Point(x.to_vec())
                } else {
                    let t = radius / r;
                    Point(center.iter().zip(x).map(|(c, v)| c + t * (v - c)).collect())
                }
            }
            ConvexSet::Simplex { scale, .. } => Point(simplex_projection(x, *scale)),
            ConvexSet::Intersection { sets, .. } => dykstra(sets, x)?,
        })
    }

    /// Deterministic probe family: vertices, `n_interior` random interior points
    /// and `n_boundary` random boundary points around `center`.
    pub fn probes<R: Rng + ?Sized>(
        &self,
        center: &[f64],
        radius: f64,
        n_interior: usize,
        n_boundary: usize,
        rng: &mut R,
    ) -> Result<Vec<Point>> {
        let mut out = self.vertices();
        let w = self.witness();
        let far = radius + self.extent(radius);
        for _ in 0..n_boundary {
            let u = random_unit(self.dim(), rng);
            let y: Vec<f64> = center.iter().zip(&u).map(|(c, ui)| c + far * ui).collect();
            out.push(self.euclidean_projection(&y)?);
        }
        for _ in 0..n_interior {
            let u = random_unit(self.dim(), rng);
            let r = radius * rng.gen::<f64>();
            let y: Vec<f64> = center.iter().zip(&u).map(|(c, ui)| c + r * ui).collect();
            let p = self.euclidean_projection(&y)?;
            let t: f64 = rng.gen_range(0.05..0.95);
            out.push(Point(
                p.iter().zip(w.iter()).map(|(a, b)| t * a + (1.0 - t) * b).collect(),
            ));
        }
        Ok(out)
    }
}

fn shift_along(x: &[f64], a: &[f64], excess: f64) -> Point {
    let t = excess / dot(a, a);
    Point(x.iter().zip(a).map(|(v, ai)| v - t * ai).collect())
}

/// Sort-and-threshold projection onto `{x ≥ 0, Σx = scale}`.
fn simplex_projection(x: &[f64], scale: f64) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - scale) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Dykstra's algorithm for the nearest point of a finite intersection.
fn dykstra(sets: &[ConvexSet], x: &[f64]) -> Result<Point> {
    let mut y = x.to_vec();
    let mut corrections = vec![vec![0.0; x.len()]; sets.len()];
    for _ in 0..DYKSTRA_MAX_CYCLES {
        let start = y.clone();
        for (set, corr) in sets.iter().zip(corrections.iter_mut()) {
            let shifted: Vec<f64> = y.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
            let p = set.euclidean_projection(&shifted)?;
            for i in 0..y.len() {
                corr[i] = shifted[i] - p[i];
            }
            y = p.0;
        }
        if dist(&start, &y) <= DYKSTRA_TOL * (1.0 + norm(&y))
            && sets.iter().all(|s| s.contains(&y, tol::MEMBERSHIP * 1e-2))
        {
            return Ok(Point(y));
        }
    }
    if sets.iter().all(|s| s.contains(&y, tol::MEMBERSHIP)) {
        return Ok(Point(y));
    }
    Err(Error::Convergence {
        solver: "dykstra",
        iterations: DYKSTRA_MAX_CYCLES,
        residual: sets
            .iter()
            .map(|s| {
                s.euclidean_projection(&y)
                    .map(|p| dist(&p, &y))
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max),
    })
}

/// Uniformly distributed unit vector.
pub fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
