//! The cyclic Halpern-type recursion for a common point of
//! `∩ EP(g_j) ∩ ∩ F(T_i)`, and the Mann-type baseline it is compared against.
//!
//! Main recursion, for `n = 1, 2, …`:
//!
//! ```text
//! u_n     = Res_{g_m} ∘ … ∘ Res_{g_1} (x_n)              (or one g_j per step, cyclically)
//! z_n     = ∇f*(α_n ∇f(anchor) + (1 - α_n) ∇f(u_n))
//! y_n     = P^f_C(z_n)
//! x_{n+1} = P^f_C(∇f*(β_n ∇f(y_n) + (1 - β_n) ∇f(T_[n] y_n)))
//! ```
//!
//! With the origin as anchor and `∇f(0) = 0` this is
//! `y_n = P^f_C(∇f*((1 - α_n) ∇f(u_n)))`. Functions with `0 ∉ int dom f`
//! need a different anchor; [`Anchor::Auto`] then uses the witness of `C`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{ep_residual, ep_residual_at, resolve, Bifunction};
use crate::error::{Error, Result};
use crate::geometry::{LegendreFunction, Point};
use crate::linalg::{dist, lincomb, norm};
use crate::operators::{cyclic_select, QbneOperator};
use crate::projection::bregman_project;
use crate::sets::ConvexSet;
use crate::tol;

/// A problem `Ω = (∩ EP(g_j)) ∩ (∩ F(T_i))` over `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInstance {
    pub name: String,
    pub f: LegendreFunction,
    pub set: ConvexSet,
    pub bifunctions: Vec<Bifunction>,
    pub operators: Vec<QbneOperator>,
    /// A known point of `Ω`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_solution: Option<Point>,
    /// `Ω` itself, when it is representable as a convex set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_set: Option<ConvexSet>,
    /// Starting point used when the experiment does not give one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_start: Option<Point>,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// Structural checks plus the Ω-consistency of the reference solution.
    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        let d = self.dim();
        for g in &self.bifunctions {
            g.validate()?;
            if g.dim() != d {
                return Err(Error::argument("bifunction dimension differs from C"));
            }
        }
        if self.operators.is_empty() {
            return Err(Error::argument("operator family is empty"));
        }
        for (label, p) in [
            ("reference solution", &self.reference_solution),
            ("default start", &self.default_start),
        ] {
            if let Some(p) = p {
                if p.dim() != d {
                    return Err(Error::argument(format!("{label} has wrong dimension")));
                }
            }
        }
        if let Some(omega) = &self.solution_set {
            if omega.dim() != d {
                return Err(Error::argument("solution set has wrong dimension"));
            }
        }
        if let Some(p) = &self.reference_solution {
            self.check_solution(p)?;
        }
        Ok(())
    }

    /// Fails unless `p` solves every equilibrium problem and is fixed by every operator.
    pub fn check_solution(&self, p: &Point) -> Result<()> {
        for (j, g) in self.bifunctions.iter().enumerate() {
            let r = ep_residual(g, p, crate::equilibrium::DEFAULT_PROBES)?;
            if r > tol::VI_RESIDUAL {
                return Err(Error::argument(format!(
                    "reference solution violates EP(g_{}) with residual {r:e}",
                    j + 1
                )));
            }
        }
        for (i, t) in self.operators.iter().enumerate() {
            let moved = dist(&t.apply(p)?, p);
            if moved > tol::VI_RESIDUAL {
                return Err(Error::argument(format!(
                    "reference solution moved by {moved:e} under T_{}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// `α_n = a / (n + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    Harmonic { a: f64, b: f64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::Harmonic { a: 1.0, b: 1.0 }
    }
}

impl AlphaSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            AlphaSchedule::Harmonic { a, b } => a / (n as f64 + b),
        }
    }

    /// `a ∈ (0, 1]`, `b ≥ 1`: then `α_n ∈ (0, 1)`, `α_n → 0` and `Σ α_n = ∞`.
    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaSchedule::Harmonic { a, b } => {
                if !(*a > 0.0 && *a <= 1.0 && b.is_finite() && *b >= 1.0) {
                    return Err(Error::Validation(format!(
                        "alpha schedule needs a in (0, 1] and b >= 1, got a={a}, b={b}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `β_n`, confined to some `[c, d] ⊂ (0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSchedule {
    Constant {
        value: f64,
    },
    /// `c` on odd `n`, `d` on even `n`.
    Alternating {
        c: f64,
        d: f64,
    },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Constant { value: 0.5 }
    }
}

impl BetaSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            BetaSchedule::Constant { value } => *value,
            BetaSchedule::Alternating { c, d } => {
                if n % 2 == 1 {
                    *c
                } else {
                    *d
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |v: f64| v > 0.0 && v < 1.0;
        let ok = match self {
            BetaSchedule::Constant { value } => inside(*value),
            BetaSchedule::Alternating { c, d } => inside(*c) && inside(*d) && c <= d,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "beta schedule must stay inside [c, d] ⊂ (0, 1), got {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventOrder {
    /// `u_n = Res_{g_m} ∘ … ∘ Res_{g_1}(x_n)`
    #[default]
    Composed,
    /// `u_n = Res_{g_[n]}(x_n)` with the same 1-based cyclic index as `T_[n]`.
    Cyclic,
}

/// The point the vanishing-weight combination pulls toward.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Anchor {
    /// The origin when it lies in `int dom f`, the witness of `C` otherwise.
    #[default]
    Auto,
    /// Always the origin; refuses functions with `0 ∉ int dom f`.
    Origin,
    /// The witness (barycenter for boxes and simplices) of `C`.
    Barycenter,
    Point {
        coords: Point,
    },
}

fn default_max_iters() -> usize {
    100_000
}
fn default_stop_residual() -> f64 {
    1e-8
}
fn default_resolvent_tol() -> f64 {
    tol::INNER_SOLVE
}
fn default_ep_probes() -> usize {
    32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub alpha: AlphaSchedule,
    #[serde(default)]
    pub beta: BetaSchedule,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_residual")]
    pub stop_residual: f64,
    #[serde(default = "default_resolvent_tol")]
    pub resolvent_tol: f64,
    /// Seeds the probe family behind `ep_residual_max`.
    pub rng_seed: u64,
    #[serde(default)]
    pub resolvent_order: ResolventOrder,
    #[serde(default)]
    pub anchor: Anchor,
    /// Random probes of `C` per bifunction for the traced equilibrium residual.
    #[serde(default = "default_ep_probes")]
    pub ep_probes: usize,
}

impl SolverConfig {
    pub fn new(rng_seed: u64) -> Self {
        SolverConfig {
            alpha: AlphaSchedule::default(),
            beta: BetaSchedule::default(),
            max_iters: default_max_iters(),
            stop_residual: default_stop_residual(),
            resolvent_tol: default_resolvent_tol(),
            rng_seed,
            resolvent_order: ResolventOrder::default(),
            anchor: Anchor::default(),
            ep_probes: default_ep_probes(),
        }
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.beta.validate()?;
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be positive".into()));
        }
        if self.stop_residual.is_nan()
            || self.stop_residual < 0.0
            || self.resolvent_tol.is_nan()
            || self.resolvent_tol <= 0.0
        {
            return Err(Error::Validation(
                "stop_residual must be >= 0 and resolvent_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the solver trace, describing iterate `x_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub x: Point,
    /// `D_f(p, x_n)` for the reference solution `p`.
    pub dist_to_ref: Option<f64>,
    /// `‖x_n - P^f_Ω(anchor)‖`
    pub dist_to_proj_anchor0: Option<f64>,
    /// `‖x_n - P^f_Ω(x_1)‖`
    pub dist_to_proj_x1: Option<f64>,
    /// `max_j` probe residual of `x_n` in `EP(g_j)`.
    pub ep_residual_max: f64,
    /// `‖x_n - T_[n] x_n‖`
    pub fixpoint_residual: f64,
    /// `‖x_{n+1} - x_n‖`
    pub step_norm: f64,
    /// `‖x_n - u_n‖`
    pub resolvent_gap: f64,
    /// `‖x_n - z_n‖` with `z_n` the pre-projection Halpern point.
    pub halpern_gap: f64,
    /// `D_f(p, y_n)`.
    pub dist_ref_y: Option<f64>,
}

/// Full output of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    /// The iterate after the last recorded step.
    pub final_x: Point,
    pub converged: bool,
    pub anchor: Point,
    /// `P^f_Ω(anchor)`, when `Ω` is known.
    pub proj_anchor: Option<Point>,
    /// `P^f_Ω(x_1)`, when `Ω` is known.
    pub proj_x1: Option<Point>,
}

impl Trace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("traces have at least one record")
    }
}

/// Resolves the anchor point, refusing the origin outside `int dom f`.
pub fn anchor_point(problem: &ProblemInstance, anchor: &Anchor) -> Result<Point> {
    let origin = Point::zeros(problem.dim());
    let p = match anchor {
        Anchor::Auto => {
            if problem.f.check_interior(&origin).is_ok() {
                origin
            } else {
                problem.set.witness()
            }
        }
        Anchor::Origin => origin,
        Anchor::Barycenter => problem.set.witness(),
        Anchor::Point { coords } => coords.clone(),
    };
    problem
        .f
        .check_interior(&p)
        .map_err(|e| Error::domain(format!("anchor is not in int dom f: {e}")))?;
    Ok(p)
}

/// `P^f_Ω(anchor)` for instances whose `Ω` is representable.
pub fn project_onto_solution_set(problem: &ProblemInstance, anchor: &Point) -> Result<Point> {
    let omega = problem
        .solution_set
        .as_ref()
        .ok_or_else(|| Error::argument(format!("instance '{}' has no explicit Ω", problem.name)))?;
    bregman_project(&problem.f, omega, anchor)
}

/// `‖x - Π_Ω(x)‖`, the Euclidean distance to the solution set.
pub fn distance_to_solution_set(problem: &ProblemInstance, x: &Point) -> Result<Option<f64>> {
    match &problem.solution_set {
        Some(omega) => Ok(Some(dist(&omega.euclidean_projection(x)?, x))),
        None => Ok(None),
    }
}

/// `∇f*(t ∇f(a) + (1 - t) ∇f(b))`.
fn dual_mix(f: &LegendreFunction, t: f64, a: &Point, b: &Point) -> Result<Point> {
    let ga = f.gradient(a)?;
    let gb = f.gradient(b)?;
    f.conjugate_gradient(&lincomb(t, &ga, 1.0 - t, &gb))
}

/// Shared per-run state: probes, anchor, reference and limit candidates.
struct RunContext {
    probes: Vec<Vec<Point>>,
    anchor: Point,
    proj_anchor: Option<Point>,
    proj_x1: Option<Point>,
}

impl RunContext {
    fn new(problem: &ProblemInstance, config: &SolverConfig, x1: &Point) -> Result<Self> {
        config.validate()?;
        problem.f.validate()?;
        if x1.dim() != problem.dim() {
            return Err(Error::argument("starting point has wrong dimension"));
        }
        problem.f.check_interior(x1)?;
        if !problem.set.contains(x1, tol::MEMBERSHIP) {
            return Err(Error::argument("starting point is not in C"));
        }
        if problem.operators.is_empty() {
            return Err(Error::argument("operator family is empty"));
        }
        let anchor = anchor_point(problem, &config.anchor)?;
        let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);
        let probes = problem
            .bifunctions
            .iter()
            .map(|g| {
                let w = g.set.witness();
                let radius = 1.0 + g.set.extent(1.0 + norm(x1) + norm(&w));
                let half = config.ep_probes / 2;
                g.set.probes(&w, radius, half, config.ep_probes - half, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let (proj_anchor, proj_x1) = if problem.solution_set.is_some() {
            (
                Some(project_onto_solution_set(problem, &anchor)?),
                Some(project_onto_solution_set(problem, x1)?),
            )
        } else {
            (None, None)
        };
        Ok(RunContext {
            probes,
            anchor,
            proj_anchor,
            proj_x1,
        })
    }

    fn ep_residual_max(&self, problem: &ProblemInstance, x: &Point) -> f64 {
        problem
            .bifunctions
            .iter()
            .zip(&self.probes)
            .map(|(g, probes)| ep_residual_at(g, x, probes))
            .fold(0.0, f64::max)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        problem: &ProblemInstance,
        n: usize,
        x: &Point,
        next: &Point,
        tx: &Point,
        u: &Point,
        z: &Point,
        y: Option<&Point>,
    ) -> Result<IterationRecord> {
        let f = &problem.f;
        let reference = problem.reference_solution.as_ref();
        Ok(IterationRecord {
            n,
            x: x.clone(),
            dist_to_ref: reference.map(|p| f.bregman_distance(p, x)).transpose()?,
            dist_to_proj_anchor0: self.proj_anchor.as_ref().map(|p| dist(p, x)),
            dist_to_proj_x1: self.proj_x1.as_ref().map(|p| dist(p, x)),
            ep_residual_max: self.ep_residual_max(problem, x),
            fixpoint_residual: dist(x, tx),
            step_norm: dist(next, x),
            resolvent_gap: dist(x, u),
            halpern_gap: dist(x, z),
            dist_ref_y: match (reference, y) {
                (Some(p), Some(y)) => Some(f.bregman_distance(p, y)?),
                _ => None,
            },
        })
    }

    fn finish(self, records: Vec<IterationRecord>, final_x: Point, converged: bool) -> Trace {
        Trace {
            records,
            final_x,
            converged,
            anchor: self.anchor,
            proj_anchor: self.proj_anchor,
            proj_x1: self.proj_x1,
        }
    }
}

fn stop_measure(r: &IterationRecord) -> f64 {
    r.ep_residual_max.max(r.fixpoint_residual).max(r.step_norm)
}

fn resolvent_stage(problem: &ProblemInstance, config: &SolverConfig, n: usize, x: &Point) -> Result<Point> {
    let f = &problem.f;
    let gs = &problem.bifunctions;
    if gs.is_empty() {
        return Ok(x.clone());
    }
    match config.resolvent_order {
        ResolventOrder::Composed => {
            let mut u = x.clone();
            for g in gs {
                u = resolve(f, g, &u, config.resolvent_tol)?;
            }
            Ok(u)
        }
        ResolventOrder::Cyclic => resolve(f, &gs[(n - 1) % gs.len()], x, config.resolvent_tol),
    }
}

/// Runs the main recursion from `x1 ∈ C ∩ int dom f`.
pub fn run_main(problem: &ProblemInstance, config: &SolverConfig, x1: &Point) -> Result<Trace> {
    let ctx = RunContext::new(problem, config, x1)?;
    let f = &problem.f;
    let c = &problem.set;
    let mut x = x1.clone();
    let mut records = Vec::new();
    let mut converged = false;

    for n in 1..=config.max_iters {
        let step = || -> Result<(Point, IterationRecord)> {
            let t = cyclic_select(&problem.operators, n)?;
            let alpha = config.alpha.at(n);
            let beta = config.beta.at(n);
            let u = resolvent_stage(problem, config, n, &x)?;
            let z = dual_mix(f, alpha, &ctx.anchor, &u)?;
            let y = bregman_project(f, c, &z)?;
            let ty = t.apply(&y)?;
            let next = bregman_project(f, c, &dual_mix(f, beta, &y, &ty)?)?;
            let tx = t.apply(&x)?;
            let rec = ctx.record(problem, n, &x, &next, &tx, &u, &z, Some(&y))?;
            Ok((next, rec))
        };
        let (next, rec) = step().map_err(|e| e.at(n))?;
        let done = stop_measure(&rec) <= config.stop_residual;
        records.push(rec);
        x = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(ctx.finish(records, x, converged))
}

/// Runs the Mann-type baseline with a single bifunction:
///
/// ```text
/// z_n     = Res^f_g(x_n)
/// y_n     = ∇f*(β_n ∇f(x_n) + (1 - β_n) ∇f(T_[n] z_n))
/// x_{n+1} = ∇f*(α_n ∇f(x_n) + (1 - α_n) ∇f(T_[n] y_n))
/// ```
pub fn run_kumam(problem: &ProblemInstance, config: &SolverConfig, x1: &Point) -> Result<Trace> {
    if problem.bifunctions.len() != 1 {
        return Err(Error::argument("the baseline takes exactly one bifunction"));
    }
    let ctx = RunContext::new(problem, config, x1)?;
    let f = &problem.f;
    let g = &problem.bifunctions[0];
    let mut x = x1.clone();
    let mut records = Vec::new();
    let mut converged = false;

    for n in 1..=config.max_iters {
        let step = || -> Result<(Point, IterationRecord)> {
            let t = cyclic_select(&problem.operators, n)?;
            let alpha = config.alpha.at(n);
            let beta = config.beta.at(n);
            let z = resolve(f, g, &x, config.resolvent_tol)?;
            let y = dual_mix(f, beta, &x, &t.apply(&z)?)?;
            let next = dual_mix(f, alpha, &x, &t.apply(&y)?)?;
            let tx = t.apply(&x)?;
            let rec = ctx.record(problem, n, &x, &next, &tx, &z, &z, None)?;
            Ok((next, rec))
        };
        let (next, rec) = step().map_err(|e| e.at(n))?;
        let done = stop_measure(&rec) <= config.stop_residual;
        records.push(rec);
        x = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(ctx.finish(records, x, converged))
}
