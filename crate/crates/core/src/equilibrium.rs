//! Monotone bifunctions `g : C × C → R`, their Bregman resolvents and the
//! equilibrium-problem residual.
//!
//! The resolvent `Res^f_g(x)` is the unique `z ∈ C` with
//! `g(z, y) + ⟨∇f(z) - ∇f(x), y - z⟩ ≥ 0` for all `y ∈ C`. Both supported
//! families turn this into a monotone variational inequality:
//!
//! - `LinearMonotone`: `g(x, y) = ⟨Ax + c, y - x⟩`, operator `Az + c + ∇f(z) - ∇f(x)`;
//! - `ProximalConvex`: `g(x, y) = h(y) - h(x)` with polyhedral `h`, written as
//!   `h(y) = max_{w ∈ S} ⟨Pᵀw, y⟩ + ⟨b, w⟩`, giving a saddle problem in `(z, w)`.
//!
//! The VI is solved by extragradient. The `∇f(z) - ∇f(x)` part is taken
//! implicitly through a Bregman projection, the rest explicitly. The step
//! shrinks whenever the mirror-prox test fails and regrows slowly after.
//! p-norms with `p > 2` are the exception: their curvature vanishes at 0,
//! so the whole operator is treated explicitly with Euclidean steps.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{LegendreFunction, Point};
use crate::linalg::{add, dist, dot, matrix_rows, matvec, matvec_t, norm, sub};
use crate::projection::bregman_project;
use crate::sets::ConvexSet;
use crate::tol;

/// Seed of the fixed probe family used by [`ep_residual`].
pub const PROBE_SEED: u64 = 0x5EED_0E0F;
/// Default number of random probes (half interior, half boundary) besides vertices.
pub const DEFAULT_PROBES: usize = 128;
/// Extragradient step acceptance ratio.
const LIPSCHITZ_RATIO: f64 = 0.9;

/// Polyhedral convex potential for [`BifunctionKind::ProximalConvex`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `h(y) = ⟨c, y⟩`
    Linear { c: Vec<f64> },
    /// `h(y) = weight · ‖y‖₁`
    L1 { weight: f64 },
    /// `h(y) = max_k ⟨slopes[k], y⟩ + offsets[k]`
    MaxAffine { slopes: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl Potential {
    pub fn zero(d: usize) -> Self {
        Potential::Linear { c: vec![0.0; d] }
    }

    /// `h(y) = max_k weights[k] · y_k`.
    pub fn max_weighted_coords(weights: &[f64]) -> Self {
        let d = weights.len();
        let slopes = (0..d)
            .map(|k| {
                let mut s = vec![0.0; d];
                s[k] = weights[k];
                s
            })
            .collect();
        Potential::MaxAffine {
            slopes,
            offsets: vec![0.0; d],
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Potential::Linear { c } => dot(c, y),
            Potential::L1 { weight } => weight * y.iter().map(|v| v.abs()).sum::<f64>(),
            Potential::MaxAffine { slopes, offsets } => slopes
                .iter()
                .zip(offsets)
                .map(|(s, o)| dot(s, y) + o)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Potential::Linear { c } if c.len() != d => Err(Error::argument("linear potential has wrong dimension")),
            Potential::L1 { weight } if !(weight.is_finite() && *weight >= 0.0) => {
                Err(Error::argument("l1 weight must be finite and nonnegative"))
            }
            Potential::MaxAffine { slopes, offsets }
                if slopes.is_empty() || slopes.len() != offsets.len() || slopes.iter().any(|s| s.len() != d) =>
            {
                Err(Error::argument(
                    "max-affine potential needs matching slopes and offsets",
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Which family a bifunction belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BifunctionKind {
    /// `g(x, y) = ⟨Ax + c, y - x⟩`; monotone iff `A + Aᵀ` is positive semidefinite.
    LinearMonotone {
        #[serde(with = "matrix_rows")]
        a: DMatrix<f64>,
        c: Vec<f64>,
    },
    /// `g(x, y) = h(y) - h(x)`.
    ProximalConvex { h: Potential },
}

/// A bifunction together with its feasible set `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bifunction {
    pub kind: BifunctionKind,
    pub set: ConvexSet,
}

impl Bifunction {
    pub fn linear_monotone(a: DMatrix<f64>, c: Vec<f64>, set: ConvexSet) -> Result<Self> {
        let g = Bifunction {
            kind: BifunctionKind::LinearMonotone { a, c },
            set,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn proximal(h: Potential, set: ConvexSet) -> Result<Self> {
        let g = Bifunction {
            kind: BifunctionKind::ProximalConvex { h },
            set,
        };
        g.validate()?;
        Ok(g)
    }

    /// `g ≡ 0`, whose equilibrium set is all of `C`.
    pub fn zero(set: ConvexSet) -> Self {
        let d = set.dim();
        Bifunction {
            kind: BifunctionKind::ProximalConvex { h: Potential::zero(d) },
            set,
        }
    }

    /// Dimension checks; monotonicity is left to [`check_axioms`].
    pub fn validate(&self) -> Result<()> {
        let d = self.set.dim();
        match &self.kind {
            BifunctionKind::LinearMonotone { a, c } => {
                if a.nrows() != d || a.ncols() != d || c.len() != d {
                    return Err(Error::argument(format!(
                        "linear bifunction needs a {d}x{d} matrix and length-{d} offset"
                    )));
                }
                if !crate::linalg::all_finite(a.as_slice()) || !crate::linalg::all_finite(c) {
                    return Err(Error::argument("linear bifunction has non-finite entries"));
                }
                Ok(())
            }
            BifunctionKind::ProximalConvex { h } => h.validate(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// `g(x, y)`.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            BifunctionKind::LinearMonotone { a, c } => dot(&add(&matvec(a, x), c), &sub(y, x)),
            BifunctionKind::ProximalConvex { h } => h.value(y) - h.value(x),
        }
    }

    /// Splits the VI operator into explicit pieces.
    fn structure(&self) -> Structure {
        let d = self.dim();
        match &self.kind {
            BifunctionKind::LinearMonotone { a, c } => Structure {
                a: Some(a.clone()),
                c: c.clone(),
                dual: None,
            },
            BifunctionKind::ProximalConvex { h } => match h {
                Potential::Linear { c } => Structure {
                    a: None,
                    c: c.clone(),
                    dual: None,
                },
                Potential::L1 { weight } => Structure {
                    a: None,
                    c: vec![0.0; d],
                    dual: Some(DualBlock {
                        set: ConvexSet::Box {
                            lo: vec![-weight; d],
                            hi: vec![*weight; d],
                        },
                        p: DMatrix::identity(d, d),
                        b: vec![0.0; d],
                    }),
                },
                Potential::MaxAffine { slopes, offsets } => Structure {
                    a: None,
                    c: vec![0.0; d],
                    dual: Some(DualBlock {
                        set: ConvexSet::Simplex {
                            dim: slopes.len(),
                            scale: 1.0,
                        },
                        p: DMatrix::from_fn(slopes.len(), d, |k, j| slopes[k][j]),
                        b: offsets.clone(),
                    }),
                },
            },
        }
    }
}

/// `h(y) = max_{w ∈ set} ⟨Pᵀw, y⟩ + ⟨b, w⟩`.
struct DualBlock {
    set: ConvexSet,
    p: DMatrix<f64>,
    b: Vec<f64>,
}

/// Explicit part of the resolvent VI: `Az + c (+ Pᵀw)` and `-(Pz + b)`.
struct Structure {
    a: Option<DMatrix<f64>>,
    c: Vec<f64>,
    dual: Option<DualBlock>,
}

impl Structure {
    fn lipschitz(&self) -> f64 {
        self.a.as_ref().map_or(0.0, |a| a.norm()) + self.dual.as_ref().map_or(0.0, |d| d.p.norm())
    }

    fn eval(&self, z: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut gz = self.c.clone();
        if let Some(a) = &self.a {
            gz = add(&gz, &matvec(a, z));
        }
        let gw = match &self.dual {
            Some(block) => {
                gz = add(&gz, &matvec_t(&block.p, w));
                add(&matvec(&block.p, z), &block.b).into_iter().map(|v| -v).collect()
            }
            None => Vec::new(),
        };
        (gz, gw)
    }

    fn project_dual(&self, w: &[f64]) -> Result<Vec<f64>> {
        match &self.dual {
            Some(block) => Ok(block.set.euclidean_projection(w)?.0),
            None => Ok(Vec::new()),
        }
    }
}

/// Residual of the resolvent VI: `‖w - Π_S(w - G(w))‖` plus the smaller of the
/// Euclidean natural residual `‖z - Π_C(z - F(z))‖` and, when `bregman` is set,
/// the fixed-point residual `‖z - P^f_C(∇f*(∇f(x) - Az - c - Pᵀw))‖`. Either
/// vanishes exactly at the solution; the second stays well conditioned where
/// `∇f` is steep.
fn natural_residual(
    f: &LegendreFunction,
    g: &Bifunction,
    st: &Structure,
    grad_x: &[f64],
    z: &Point,
    w: &[f64],
    bregman: bool,
) -> Result<f64> {
    let (gz, gw) = st.eval(z, w);
    let full = add(&sub(&f.gradient(z)?, grad_x), &gz);
    let pz = g.set.euclidean_projection(&sub(z, &full))?;
    let mut r = dist(&pz, z);
    if bregman && r > 0.0 {
        let target = f.conjugate_gradient(&sub(grad_x, &gz))?;
        r = r.min(dist(&bregman_project(f, &g.set, &target)?, z));
    }
    if !w.is_empty() {
        let pw = st.project_dual(&sub(w, &gw))?;
        r += dist(&pw, w);
    }
    Ok(r)
}

/// Closed form for separable `f`, a box `C` and a linear or `ℓ₁` potential:
/// each coordinate is a one-dimensional problem solved by a shift or soft
/// threshold in dual coordinates followed by a clamp.
fn separable_box_resolvent(f: &LegendreFunction, g: &Bifunction, grad_x: &[f64]) -> Result<Option<Point>> {
    let (lo, hi) = match &g.set {
        ConvexSet::Box { lo, hi } if f.is_separable() => (lo, hi),
        _ => return Ok(None),
    };
    let shifted: Vec<f64> = match &g.kind {
        BifunctionKind::ProximalConvex {
            h: Potential::Linear { c },
        } => sub(grad_x, c),
        BifunctionKind::ProximalConvex {
            h: Potential::L1 { weight },
        } => grad_x
            .iter()
            .map(|v| v.signum() * (v.abs() - weight).max(0.0))
            .collect(),
        _ => return Ok(None),
    };
    let free = f.conjugate_gradient_raw(&shifted);
    let z: Vec<f64> = free
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.clamp(*l, *h))
        .collect();
    f.check_interior(&z)?;
    Ok(Some(Point(z)))
}

fn scaled(t: f64, v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| t * x).collect()
}

/// `Res^f_g(x)` to natural-residual tolerance `tol`.
pub fn resolve(f: &LegendreFunction, g: &Bifunction, x: &Point, tol: f64) -> Result<Point> {
    f.check_interior(x)?;
    if x.dim() != g.dim() {
        return Err(Error::argument("point and bifunction differ in dimension"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::argument("resolvent tolerance must be positive"));
    }
    let grad_x = f.gradient(x)?.0;
    if let Some(z) = separable_box_resolvent(f, g, &grad_x)? {
        return Ok(z);
    }
    let st = g.structure();

    // Functions whose curvature vanishes somewhere (p-norms with p > 2) make
    // Bregman steps stall there; for them the whole operator, ∇f included, is
    // taken explicitly with Euclidean steps.
    let implicit = !matches!(f, LegendreFunction::PNorm { p } if *p > 2.0);

    // Explicit part of the operator at z, given the structural part gz.
    let explicit_part = |z: &Point, gz: Vec<f64>| -> Result<Vec<f64>> {
        if implicit {
            Ok(gz)
        } else {
            Ok(add(&gz, &sub(&f.gradient(z)?, &grad_x)))
        }
    };

    // Implicit: z ↦ P^f_C(∇f*((τ∇f(x) + ∇f(z) - τv) / (1 + τ))).
    // Explicit: z ↦ Π_C(z - τv).
    let step = |z: &Point, v: &[f64], tau: f64| -> Result<Point> {
        if !implicit {
            return g.set.euclidean_projection(&sub(z, &scaled(tau, v)));
        }
        let gz = f.gradient(z)?;
        let mixed: Vec<f64> = grad_x
            .iter()
            .zip(gz.iter())
            .zip(v)
            .map(|((gx, gzi), vi)| (tau * gx + gzi - tau * vi) / (1.0 + tau))
            .collect();
        bregman_project(f, &g.set, &f.conjugate_gradient(&mixed)?)
    };

    // ⟨∇f(a) - ∇f(b), a - b⟩, or ‖a - b‖² in explicit mode.
    let sym = |a: &Point, b: &Point| -> Result<f64> {
        if implicit {
            Ok(dot(&sub(&f.gradient(a)?, &f.gradient(b)?), &sub(a, b)))
        } else {
            Ok(dist(a, b).powi(2))
        }
    };

    let lip = st.lipschitz();
    let tau_max = if lip > 0.0 { 1.0 / lip } else { 1e8 };
    let mut tau = tau_max;
    let mut z = bregman_project(f, &g.set, x)?;
    let mut w = match &st.dual {
        Some(block) => block.set.euclidean_projection(&vec![0.0; block.p.nrows()])?.0,
        None => Vec::new(),
    };
    let mut residual = natural_residual(f, g, &st, &grad_x, &z, &w, implicit)?;

    for _ in 0..tol::RESOLVENT_MAX_ITERS {
        if residual <= tol {
            return Ok(z);
        }
        let (gz, gw) = st.eval(&z, &w);
        let gz = explicit_part(&z, gz)?;
        tau = (tau * 1.25).min(tau_max);
        // Predictor and corrector, halving the step until
        // τ⟨F(ẑ) - F(z), ẑ - z⁺⟩ ≤ ρ (S(z⁺, ẑ) + S(ẑ, z)) / 2 holds, S the symmetrized distance.
        let (zn, wn) = loop {
            let zb = step(&z, &gz, tau)?;
            let wb = st.project_dual(&sub(&w, &scaled(tau, &gw)))?;
            let (gzb, gwb) = st.eval(&zb, &wb);
            let gzb = explicit_part(&zb, gzb)?;
            let zn = step(&z, &gzb, tau)?;
            let wn = st.project_dual(&sub(&w, &scaled(tau, &gwb)))?;
            let lhs = tau * (dot(&sub(&gzb, &gz), &sub(&zb, &zn)) + dot(&sub(&gwb, &gw), &sub(&wb, &wn)));
            let rhs = 0.5 * (sym(&zn, &zb)? + sym(&zb, &z)? + dist(&wn, &wb).powi(2) + dist(&wb, &w).powi(2));
            if lhs <= LIPSCHITZ_RATIO * rhs || tau < 1e-12 {
                break (zn, wn);
            }
            tau *= 0.5;
        };
        z = zn;
        w = wn;
        residual = natural_residual(f, g, &st, &grad_x, &z, &w, implicit)?;
    }
    if residual <= tol {
        return Ok(z);
    }
    Err(Error::Convergence {
        solver: "extragradient resolvent",
        iterations: tol::RESOLVENT_MAX_ITERS,
        residual,
    })
}

/// A point certified to lie in `EP(g)` up to its probe residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpSolution {
    pub point: Point,
    pub residual: f64,
}

impl EpSolution {
    /// Certifies `z` against the default probe family, failing if the residual exceeds `tol`.
    pub fn certify(g: &Bifunction, z: Point, tol: f64) -> Result<Self> {
        let residual = ep_residual(g, &z, DEFAULT_PROBES)?;
        if residual > tol {
            return Err(Error::argument(format!(
                "point is not an equilibrium: residual {residual:e} > {tol:e}"
            )));
        }
        Ok(EpSolution { point: z, residual })
    }
}

/// The fixed probe family of `C` around `z`: vertices plus `n_probes` random points.
pub fn ep_probes(g: &Bifunction, z: &[f64], n_probes: usize) -> Result<Vec<Point>> {
    let mut rng = ChaCha20Rng::seed_from_u64(PROBE_SEED);
    let radius = 1.0 + norm(z);
    let interior = n_probes / 2;
    g.set.probes(z, radius, interior, n_probes - interior, &mut rng)
}

/// `max(0, max_y -g(z, y))` over a fixed probe family of `C`.
pub fn ep_residual(g: &Bifunction, z: &Point, n_probes: usize) -> Result<f64> {
    if !g.set.contains(z, tol::PROJECTION_MEMBERSHIP) {
        return Err(Error::argument("equilibrium candidate is not in C"));
    }
    let probes = ep_probes(g, z, n_probes)?;
    Ok(ep_residual_at(g, z, &probes))
}

/// [`ep_residual`] against caller-supplied probes, without a membership check.
pub fn ep_residual_at(g: &Bifunction, z: &[f64], probes: &[Point]) -> f64 {
    probes
        .iter()
        .map(|y| -g.value(z, y))
        .fold(0.0, |acc: f64, v| if v > acc { v } else { acc })
}

/// `D_f(q, x) - D_f(q, z) - D_f(z, x)` with `z = Res^f_g(x)`, for `q ∈ EP(g)`.
pub fn resolvent_inequality_gap(f: &LegendreFunction, g: &Bifunction, x: &Point, q: &Point, tol: f64) -> Result<f64> {
    let r = ep_residual(g, q, DEFAULT_PROBES)?;
    if r > tol::VI_RESIDUAL {
        return Err(Error::argument(format!(
            "reference point is not in EP(g): residual {r:e}"
        )));
    }
    let z = resolve(f, g, x, tol)?;
    Ok(f.bregman_distance(q, x)? - f.bregman_distance(q, &z)? - f.bregman_distance(&z, x)?)
}

/// `⟨∇f(x) - ∇f(y), Tx - Ty⟩ - ⟨∇f(Tx) - ∇f(Ty), Tx - Ty⟩` with `T = Res^f_g`.
pub fn firmly_nonexpansive_gap(f: &LegendreFunction, g: &Bifunction, x: &Point, y: &Point, tol: f64) -> Result<f64> {
    let tx = resolve(f, g, x, tol)?;
    let ty = resolve(f, g, y, tol)?;
    let diff = sub(&tx, &ty);
    let lhs = dot(&sub(&f.gradient(x)?, &f.gradient(y)?), &diff);
    let rhs = dot(&sub(&f.gradient(&tx)?, &f.gradient(&ty)?), &diff);
    Ok(lhs - rhs)
}

/// Outcome of one axiom over the sampled tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub passed: bool,
    /// Largest observed violation measure (≤ threshold when passing).
    pub worst: f64,
    pub threshold: f64,
    /// Sample points realizing `worst`.
    pub witness: Vec<Point>,
}

impl AxiomCheck {
    fn new(threshold: f64) -> Self {
        AxiomCheck {
            passed: true,
            worst: f64::NEG_INFINITY,
            threshold,
            witness: Vec::new(),
        }
    }

    fn record(&mut self, value: f64, points: &[&Point]) {
        if value > self.worst {
            self.worst = value;
            self.witness = points.iter().map(|p| (*p).clone()).collect();
        }
        if value > self.threshold {
            self.passed = false;
        }
    }
}

/// Sampled report on conditions (A1)–(A4).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// `|g(x, x)|`
    pub a1_vanishing_diagonal: AxiomCheck,
    /// `g(x, y) + g(y, x)`
    pub a2_monotone: AxiomCheck,
    /// `g(x + t(z - x), y) - g(x, y)` at the smallest `t`
    pub a3_hemicontinuous: AxiomCheck,
    /// `g(x, ty + (1-t)z) - t g(x, y) - (1-t) g(x, z)`
    pub a4_convex_in_second: AxiomCheck,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.a1_vanishing_diagonal.passed
            && self.a2_monotone.passed
            && self.a3_hemicontinuous.passed
            && self.a4_convex_in_second.passed
    }
}

/// Samples `n_samples` tuples `(x, y, z, t)` in `C` and checks (A1)–(A4).
pub fn check_axioms(g: &Bifunction, n_samples: usize, seed: u64) -> Result<AxiomReport> {
    use rand::Rng;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let center = g.set.witness();
    let radius = 1.0 + g.set.extent(2.0);
    let pool = g
        .set
        .probes(&center, radius, n_samples.max(3), n_samples.max(3), &mut rng)?;
    let pick = |rng: &mut ChaCha20Rng| pool[rng.gen_range(0..pool.len())].clone();

    let mut report = AxiomReport {
        a1_vanishing_diagonal: AxiomCheck::new(1e-12),
        a2_monotone: AxiomCheck::new(1e-10),
        a3_hemicontinuous: AxiomCheck::new(1e-8),
        a4_convex_in_second: AxiomCheck::new(1e-10),
    };
    for _ in 0..n_samples {
        let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let t: f64 = rng.gen();
        let scale = 1.0 + g.value(&x, &y).abs() + g.value(&x, &z).abs();

        report.a1_vanishing_diagonal.record(g.value(&x, &x).abs(), &[&x]);
        report.a2_monotone.record(g.value(&x, &y) + g.value(&y, &x), &[&x, &y]);

        // Limit along t = 1e-2, …, 1e-8, extrapolated linearly from the last two terms.
        let base = g.value(&x, &y);
        let along: Vec<f64> = (2..=8)
            .map(|k| {
                let s = 10f64.powi(-k);
                let xs: Vec<f64> = x.iter().zip(z.iter()).map(|(a, b)| a + s * (b - a)).collect();
                g.value(&xs, &y)
            })
            .collect();
        let (prev, last) = (along[along.len() - 2], along[along.len() - 1]);
        let limit = last - (prev - last) / 9.0;
        report.a3_hemicontinuous.record(limit - base, &[&x, &y, &z]);

        let mix = Point(y.iter().zip(z.iter()).map(|(a, b)| t * a + (1.0 - t) * b).collect());
        let excess = g.value(&x, &mix) - t * g.value(&x, &y) - (1.0 - t) * g.value(&x, &z);
        report.a4_convex_in_second.record(excess / scale, &[&x, &y, &z]);
    }
    Ok(report)
}
