//! Sampled sweeps over every identity and inequality the library relies on,
//! collected into one machine-readable report.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    check_axioms, ep_residual, firmly_nonexpansive_gap, resolve, resolvent_inequality_gap, AxiomCheck, Bifunction,
    Potential,
};
use crate::error::Result;
use crate::geometry::{chain_gap, dual_average, three_point_gap, v_fn, DualPoint, LegendreFunction, Point};
use crate::harness::instances::{generate_instance, CATALOG};
use crate::linalg::{add, dist, dot, norm, sub};
use crate::operators::qbne_gap;
use crate::projection::{bregman_project, projection_vi_residual, pythagoras_gap};
use crate::sets::ConvexSet;
use crate::solver::{anchor_point, run_main, SolverConfig};
use crate::tol;

/// Which side of the threshold a sweep's values must stay on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// every value ≤ threshold; `worst` is the maximum
    AtMost,
    /// every value ≥ threshold; `worst` is the minimum
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub name: String,
    pub bound: Bound,
    pub threshold: f64,
    pub worst: f64,
    pub samples: usize,
    pub passed: bool,
    /// Inputs realizing `worst`.
    pub witness: Vec<Point>,
    /// First error raised while sampling, if any; such a sweep fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepEntry {
    fn new(name: impl Into<String>, bound: Bound, threshold: f64) -> Self {
        SweepEntry {
            name: name.into(),
            bound,
            threshold,
            worst: match bound {
                Bound::AtMost => f64::NEG_INFINITY,
                Bound::AtLeast => f64::INFINITY,
            },
            samples: 0,
            passed: true,
            witness: Vec::new(),
            error: None,
        }
    }

    fn at_most(name: impl Into<String>, threshold: f64) -> Self {
        Self::new(name, Bound::AtMost, threshold)
    }

    fn at_least(name: impl Into<String>, threshold: f64) -> Self {
        Self::new(name, Bound::AtLeast, threshold)
    }

    fn record(&mut self, value: f64, witness: &[&[f64]]) {
        self.samples += 1;
        let worse = match self.bound {
            Bound::AtMost => value > self.worst,
            Bound::AtLeast => value < self.worst,
        };
        if worse || value.is_nan() {
            self.worst = value;
            self.witness = witness.iter().map(|w| Point(w.to_vec())).collect();
        }
        let ok = match self.bound {
            Bound::AtMost => value <= self.threshold,
            Bound::AtLeast => value >= self.threshold,
        };
        if !ok {
            self.passed = false;
        }
    }

    /// Records the value of a fallible sample, failing the sweep on error.
    fn try_record(&mut self, value: Result<f64>, witness: &[&[f64]]) {
        match value {
            Ok(v) => self.record(v, witness),
            Err(e) => {
                self.passed = false;
                if self.error.is_none() {
                    self.error = Some(e.to_string());
                    self.witness = witness.iter().map(|w| Point(w.to_vec())).collect();
                }
            }
        }
    }

    fn from_axiom(name: String, check: &AxiomCheck, samples: usize) -> Self {
        SweepEntry {
            name,
            bound: Bound::AtMost,
            threshold: check.threshold,
            worst: check.worst,
            samples,
            passed: check.passed,
            witness: check.witness.clone(),
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub entries: Vec<SweepEntry>,
}

impl VerifyReport {
    pub fn entry(&self, name: &str) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    /// Worst value over all entries whose name starts with `prefix`.
    pub fn worst_with_prefix(&self, prefix: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .map(|e| e.worst)
            .reduce(f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Samples per geometry sweep; the costlier sweeps use a fraction.
    pub samples: usize,
    /// Iterations of each solver run.
    pub solver_iters: usize,
    /// Adds the non-monotone bifunction `A = -I` to the axiom sweep.
    pub inject_invalid: bool,
}

impl VerifyOptions {
    pub fn new(seed: u64) -> Self {
        VerifyOptions {
            seed,
            samples: 200,
            solver_iters: 1000,
            inject_invalid: false,
        }
    }
}

const DIMS: [usize; 4] = [1, 2, 5, 8];

fn normal_vec(rng: &mut ChaCha20Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// A random symmetric positive definite matrix `MᵀM/d + I/2`.
pub fn random_spd(rng: &mut ChaCha20Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.transpose() * &m / d as f64 + DMatrix::identity(d, d) * 0.5
}

/// The built-in kinds at dimension `d`: squared norm, a random quadratic form,
/// p-norms with `p = 1.5` and `p = 4`, and negative entropy.
pub fn sample_kinds(rng: &mut ChaCha20Rng, d: usize) -> Vec<LegendreFunction> {
    vec![
        LegendreFunction::SquaredNorm,
        LegendreFunction::quadratic(random_spd(rng, d)).expect("random SPD is valid"),
        LegendreFunction::p_norm(1.5).expect("valid exponent"),
        LegendreFunction::p_norm(4.0).expect("valid exponent"),
        LegendreFunction::NegativeEntropy,
    ]
}

/// Short label per kind, stable across dimensions.
pub fn kind_label(f: &LegendreFunction) -> String {
    match f {
        LegendreFunction::SquaredNorm => "squared_norm".into(),
        LegendreFunction::QuadraticForm { .. } => "quadratic_form".into(),
        LegendreFunction::PNorm { p } => format!("p_norm_{p}"),
        LegendreFunction::NegativeEntropy => "negative_entropy".into(),
    }
}

/// A random point of `int dom f`: coordinates in `[0.1, 3]` for entropy,
/// scaled Gaussians otherwise.
pub fn sample_interior(rng: &mut ChaCha20Rng, f: &LegendreFunction, d: usize) -> Point {
    match f {
        LegendreFunction::NegativeEntropy => Point((0..d).map(|_| rng.gen_range(0.1..3.0)).collect()),
        _ => Point(normal_vec(rng, d, 1.5)),
    }
}

fn rel(gap: f64, scale: f64) -> f64 {
    gap.abs() / (1.0 + scale.abs())
}

fn geometry_sweeps(opts: &VerifyOptions, rng: &mut ChaCha20Rng, out: &mut Vec<SweepEntry>) {
    let labels: Vec<String> = sample_kinds(rng, 1).iter().map(kind_label).collect();
    let names = [
        "nonnegativity",
        "three_point",
        "chain",
        "round_trip",
        "young_fenchel",
        "v_function",
        "v_function_subgradient",
        "jensen",
    ];
    let mut entries: Vec<Vec<SweepEntry>> = labels
        .iter()
        .map(|l| {
            names
                .iter()
                .map(|n| {
                    let name = format!("geometry/{n}/{l}");
                    match *n {
                        "nonnegativity" => SweepEntry::at_least(name, -1e-12),
                        "three_point" | "chain" => SweepEntry::at_most(name, tol::IDENTITY),
                        "jensen" => SweepEntry::at_least(name, -1e-9),
                        _ => SweepEntry::at_most(name, tol::ROUND_TRIP),
                    }
                })
                .collect()
        })
        .collect();
    let per_dim = opts.samples.div_ceil(DIMS.len());
    for d in DIMS {
        let kinds = sample_kinds(rng, d);
        for (k, f) in kinds.iter().enumerate() {
            let e = &mut entries[k];
            for _ in 0..per_dim {
                let x = sample_interior(rng, f, d);
                let y = sample_interior(rng, f, d);
                let z = sample_interior(rng, f, d);
                e[0].try_record(f.bregman_distance(&y, &x), &[&y, &x]);

                let dzx = f.bregman_distance(&z, &x).unwrap_or(0.0);
                e[1].try_record(three_point_gap(f, &z, &y, &x).map(|g| rel(g, dzx)), &[&z, &y, &x]);

                let len = rng.gen_range(2..=6);
                let ys: Vec<Point> = (0..len).map(|_| sample_interior(rng, f, d)).collect();
                let d1n = f.bregman_distance(&ys[0], &ys[len - 1]).unwrap_or(0.0);
                let flat: Vec<&[f64]> = ys.iter().map(|p| &p[..]).collect();
                e[2].try_record(chain_gap(f, &ys).map(|g| rel(g, d1n)), &flat);

                let gx = f.gradient(&x);
                e[3].try_record(
                    gx.clone()
                        .and_then(|g| f.conjugate_gradient(&g))
                        .map(|back| dist(&back, &x) / (1.0 + norm(&x))),
                    &[&x],
                );
                e[4].try_record(
                    gx.clone().and_then(|g| {
                        let fx = f.value(&x)?;
                        let fs = f.conjugate(&g)?;
                        Ok(rel(fx + fs - dot(&g, &x), fx.abs() + fs.abs()))
                    }),
                    &[&x],
                );

                let xs = match f.gradient(&z) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                e[5].try_record(
                    f.conjugate_gradient(&xs).and_then(|w| {
                        let v = v_fn(f, &x, &xs)?;
                        Ok(rel(v - f.bregman_distance(&x, &w)?, v))
                    }),
                    &[&x, &xs],
                );
                let ys_dual = DualPoint(normal_vec(rng, d, 0.5));
                let shifted = DualPoint(add(&xs, &ys_dual));
                e[6].try_record(
                    (|| {
                        let lhs = v_fn(f, &x, &xs)? + dot(&sub(&f.conjugate_gradient(&xs)?, &x), &ys_dual);
                        let rhs = v_fn(f, &x, &shifted)?;
                        Ok((lhs - rhs) / (1.0 + rhs.abs()))
                    })(),
                    &[&x, &xs, &ys_dual],
                );

                let n = rng.gen_range(1..=5);
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                let mut w: Vec<f64> = raw.iter().map(|v| v / s).collect();
                let head: f64 = w[..n - 1].iter().sum();
                w[n - 1] = 1.0 - head;
                let pts: Vec<Point> = (0..n).map(|_| sample_interior(rng, f, d)).collect();
                e[7].try_record(
                    (|| {
                        let avg = dual_average(f, &w, &pts)?;
                        let mut rhs = 0.0;
                        for (t, p) in w.iter().zip(&pts) {
                            rhs += t * f.bregman_distance(&z, p)?;
                        }
                        Ok(rhs - f.bregman_distance(&z, &avg)?)
                    })(),
                    &[&z, &w],
                );
            }
        }
    }
    out.extend(entries.into_iter().flatten());
}

/// Sets meeting the positive orthant, so every kind can project onto them.
pub fn sample_sets(rng: &mut ChaCha20Rng, d: usize) -> Vec<(&'static str, ConvexSet)> {
    let a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.5)).collect();
    let b = 0.5 * a.iter().sum::<f64>();
    let mut signed = normal_vec(rng, d, 1.0);
    if norm(&signed) < 1e-3 {
        signed[0] = 1.0;
    }
    let mid = vec![1.0; d];
    let sb = dot(&signed, &mid);
    vec![
        ("halfspace", ConvexSet::halfspace(a.clone(), b).unwrap()),
        ("signed_halfspace", ConvexSet::halfspace(signed, sb).unwrap()),
        ("hyperplane", ConvexSet::hyperplane(a, b).unwrap()),
        ("box", ConvexSet::cube(d, 0.2, 2.0).unwrap()),
        ("ball", ConvexSet::ball(vec![1.5; d], 1.0).unwrap()),
        ("simplex", ConvexSet::simplex(d, 1.0).unwrap()),
    ]
}

fn projection_sweeps(opts: &VerifyOptions, rng: &mut ChaCha20Rng, out: &mut Vec<SweepEntry>) {
    let n = (opts.samples / 4).max(1);
    let d = 3;
    let kinds = sample_kinds(rng, d);
    let sets = sample_sets(rng, d);
    for f in &kinds {
        for (set_name, set) in &sets {
            let tag = format!("{}/{}", kind_label(f), set_name);
            let mut vi = SweepEntry::at_most(format!("projection/vi_residual/{tag}"), tol::VI_RESIDUAL);
            let mut pyth = SweepEntry::at_least(format!("projection/pythagoras/{tag}"), -1e-8);
            let mut idem = SweepEntry::at_most(format!("projection/idempotence/{tag}"), 1e-8);
            for _ in 0..n {
                let x = sample_interior(rng, f, d);
                let p = match bregman_project(f, set, &x) {
                    Ok(p) => p,
                    Err(e) => {
                        vi.try_record(Err(e), &[&x]);
                        continue;
                    }
                };
                let probes = set.probes(&p, 2.0, 50, 50, rng);
                vi.try_record(
                    probes.and_then(|probes| {
                        let mut gap = projection_vi_residual(f, set, &x, &p, &probes)?;
                        // VI residual relative to the dual gradient scale.
                        gap /= 1.0 + norm(&f.gradient(&x)?) + norm(&f.gradient(&p)?);
                        Ok(gap)
                    }),
                    &[&x, &p],
                );
                let y = match set.probes(&p, 2.0, 1, 0, rng) {
                    Ok(ps) => ps.last().cloned().unwrap_or_else(|| p.clone()),
                    Err(_) => p.clone(),
                };
                if f.check_domain(&y).is_ok() {
                    pyth.try_record(pythagoras_gap(f, set, &x, &y), &[&x, &y]);
                }
                idem.try_record(bregman_project(f, set, &p).map(|q| dist(&q, &p)), &[&x, &p]);
            }
            out.extend([vi, pyth, idem]);
        }
    }
}

/// Bifunctions with known equilibrium points, keyed by a label.
pub fn sample_bifunctions(rng: &mut ChaCha20Rng) -> Vec<(&'static str, LegendreFunction, Bifunction, Point)> {
    let d = 3;
    let boxc = ConvexSet::cube(d, -3.0, 3.0).unwrap();
    let skew = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = (&skew - skew.transpose()) * 0.5 + random_spd(rng, d);
    let q = Point(normal_vec(rng, d, 0.5));
    let c: Vec<f64> = (-(&a * nalgebra::DVector::from_column_slice(&q)))
        .iter()
        .copied()
        .collect();
    let linear = Bifunction::linear_monotone(a, c, boxc.clone()).unwrap();
    let l1 = Bifunction::proximal(Potential::L1 { weight: 0.7 }, boxc).unwrap();
    let simplex = ConvexSet::simplex(d, 1.0).unwrap();
    let weights = [2.0, 4.0, 8.0];
    let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let total: f64 = inv.iter().sum();
    let p = Point(inv.iter().map(|v| v / total).collect());
    let maxw = Bifunction::proximal(Potential::max_weighted_coords(&weights), simplex).unwrap();
    vec![
        ("linear", LegendreFunction::SquaredNorm, linear.clone(), q.clone()),
        ("linear_p4", LegendreFunction::p_norm(4.0).unwrap(), linear, q),
        ("l1", LegendreFunction::SquaredNorm, l1, Point::zeros(d)),
        ("max_weighted_entropy", LegendreFunction::NegativeEntropy, maxw, p),
    ]
}

fn resolvent_sweeps(opts: &VerifyOptions, rng: &mut ChaCha20Rng, out: &mut Vec<SweepEntry>) {
    let n = (opts.samples / 10).max(1);
    for (label, f, g, q) in sample_bifunctions(rng) {
        let tol_inner = 1e-12;
        let mut fixed = SweepEntry::at_most(format!("resolvent/fixed_point/{label}"), tol::VI_RESIDUAL);
        fixed.try_record(resolve(&f, &g, &q, tol_inner).map(|z| dist(&z, &q)), &[&q]);
        let mut fne = SweepEntry::at_least(format!("resolvent/firmly_nonexpansive/{label}"), -1e-7);
        let mut ineq = SweepEntry::at_least(format!("resolvent/inequality/{label}"), -1e-7);
        let mut single = SweepEntry::at_most(format!("resolvent/single_valued/{label}"), 1e-5);
        let mut cert = SweepEntry::at_most(format!("resolvent/ep_residual/{label}"), tol::VI_RESIDUAL);
        let d = g.dim();
        for _ in 0..n {
            let x = sample_interior(rng, &f, d);
            let y = sample_interior(rng, &f, d);
            fne.try_record(firmly_nonexpansive_gap(&f, &g, &x, &y, tol_inner), &[&x, &y]);
            ineq.try_record(resolvent_inequality_gap(&f, &g, &x, &q, tol_inner), &[&x, &q]);
            let bump: Vec<f64> = normal_vec(rng, d, 1.0);
            let scale = 1e-6 / norm(&bump).max(1e-300);
            let xp = Point(x.iter().zip(&bump).map(|(a, b)| a + scale * b).collect());
            single.try_record(
                (|| {
                    Ok(dist(
                        &resolve(&f, &g, &x, tol_inner)?,
                        &resolve(&f, &g, &xp, tol_inner)?,
                    ))
                })(),
                &[&x, &xp],
            );
            if let Ok(z) = resolve(&f, &g, &x, tol_inner) {
                // A fixed point of the resolvent solves the equilibrium problem.
                if let Ok(zz) = resolve(&f, &g, &z, tol_inner) {
                    if dist(&zz, &z) <= 1e-9 {
                        cert.try_record(ep_residual(&g, &z, 64), &[&z]);
                    }
                }
            }
        }
        out.extend([fixed, fne, ineq, single, cert]);
    }
}

fn axiom_sweeps(opts: &VerifyOptions, rng: &mut ChaCha20Rng, out: &mut Vec<SweepEntry>) {
    let mut list: Vec<(String, Bifunction)> = sample_bifunctions(rng)
        .into_iter()
        .filter(|(label, ..)| *label != "linear_p4")
        .map(|(label, _, g, _)| (label.to_string(), g))
        .collect();
    if opts.inject_invalid {
        let c = ConvexSet::cube(3, -3.0, 3.0).unwrap();
        let bad = Bifunction::linear_monotone(-DMatrix::identity(3, 3), vec![0.0; 3], c).unwrap();
        list.push(("injected_negative_identity".into(), bad));
    }
    let n = opts.samples.max(10);
    for (label, g) in list {
        match check_axioms(&g, n, opts.seed) {
            Ok(r) => {
                for (axiom, check) in [
                    ("a1", &r.a1_vanishing_diagonal),
                    ("a2", &r.a2_monotone),
                    ("a3", &r.a3_hemicontinuous),
                    ("a4", &r.a4_convex_in_second),
                ] {
                    out.push(SweepEntry::from_axiom(format!("axioms/{axiom}/{label}"), check, n));
                }
            }
            Err(e) => {
                let mut entry = SweepEntry::at_most(format!("axioms/{label}"), 0.0);
                entry.try_record(Err(e), &[]);
                out.push(entry);
            }
        }
    }
}

fn operator_and_solver_sweeps(opts: &VerifyOptions, rng: &mut ChaCha20Rng, out: &mut Vec<SweepEntry>) {
    for info in CATALOG {
        let name = info.name;
        let problem = match generate_instance(name, info.default_dim, opts.seed) {
            Ok(p) => p,
            Err(e) => {
                let mut entry = SweepEntry::at_most(format!("instance/{name}"), 0.0);
                entry.try_record(Err(e), &[]);
                out.push(entry);
                continue;
            }
        };
        let f = &problem.f;
        let d = problem.dim();
        let p = problem
            .reference_solution
            .clone()
            .expect("catalog instances declare a solution");

        let mut qb = SweepEntry::at_least(format!("operators/qbne/{name}"), -1e-7);
        for _ in 0..(opts.samples / 10).max(1) {
            let x = match &problem.set {
                ConvexSet::Simplex { .. } => {
                    let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    Point(raw.iter().map(|v| v / s).collect())
                }
                _ => sample_interior(rng, f, d),
            };
            for t in &problem.operators {
                qb.try_record(qbne_gap(t, f, &p, &x), &[&x]);
            }
        }
        out.push(qb);

        let cfg = SolverConfig::new(opts.seed).with_max_iters(opts.solver_iters);
        let mut bounded = SweepEntry::at_most(format!("solver/boundedness/{name}"), 1e-7);
        let mut stage = SweepEntry::at_most(format!("solver/stage_bound/{name}"), 1e-7);
        let mut feasible = SweepEntry::at_most(format!("solver/feasibility/{name}"), 0.0);
        let run = (|| -> Result<_> {
            let x1 = problem.default_start.clone().expect("catalog instances have a start");
            let anchor = anchor_point(&problem, &cfg.anchor)?;
            let trace = run_main(&problem, &cfg, &x1)?;
            Ok((anchor, trace))
        })();
        match run {
            Ok((anchor, trace)) => {
                let d_anchor = f.bregman_distance(&p, &anchor).unwrap_or(f64::NAN);
                let mut xs: Vec<&Point> = trace.records.iter().map(|r| &r.x).collect();
                xs.push(&trace.final_x);
                for (k, r) in trace.records.iter().enumerate() {
                    let alpha = cfg.alpha.at(r.n);
                    let dx = r.dist_to_ref.unwrap_or(f64::NAN);
                    let next = xs[k + 1];
                    bounded.try_record(f.bregman_distance(&p, next).map(|dn| dn - d_anchor.max(dx)), &[next]);
                    if let Some(dy) = r.dist_ref_y {
                        stage.record(dy - (alpha * d_anchor + (1.0 - alpha) * dx), &[&r.x]);
                    }
                    let outside = if problem.set.contains(&r.x, tol::MEMBERSHIP) && f.check_interior(&r.x).is_ok() {
                        0.0
                    } else {
                        1.0
                    };
                    feasible.record(outside, &[&r.x]);
                }
            }
            Err(e) => {
                for entry in [&mut bounded, &mut stage, &mut feasible] {
                    entry.try_record(Err(e.clone()), &[]);
                }
            }
        }
        out.extend([bounded, stage, feasible]);
    }
}

/// Runs every sweep with the given options. Failures are report entries.
pub fn verify_suite_with(opts: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::new();
    geometry_sweeps(opts, &mut rng, &mut entries);
    projection_sweeps(opts, &mut rng, &mut entries);
    resolvent_sweeps(opts, &mut rng, &mut entries);
    axiom_sweeps(opts, &mut rng, &mut entries);
    operator_and_solver_sweeps(opts, &mut rng, &mut entries);
    VerifyReport {
        seed: opts.seed,
        passed: entries.iter().all(|e| e.passed),
        entries,
    }
}

pub fn verify_suite(seed: u64) -> VerifyReport {
    verify_suite_with(&VerifyOptions::new(seed))
}
