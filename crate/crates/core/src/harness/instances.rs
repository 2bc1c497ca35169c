//! Built-in problem instances with analytically known solution sets.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::equilibrium::{Bifunction, Potential};
use crate::error::{Error, Result};
use crate::geometry::{LegendreFunction, Point};
use crate::operators::QbneOperator;
use crate::sets::ConvexSet;
use crate::solver::ProblemInstance;

/// Catalog entry of [`generate_instance`].
#[derive(Clone, Copy, Debug)]
pub struct InstanceInfo {
    pub name: &'static str,
    pub min_dim: usize,
    pub default_dim: usize,
    pub summary: &'static str,
}

pub const CATALOG: &[InstanceInfo] = &[
    InstanceInfo {
        name: "degenerate-identity",
        min_dim: 1,
        default_dim: 2,
        summary: "squared norm on [-1,1]^d, g = 0, T = identity; Ω = C",
    },
    InstanceInfo {
        name: "euclidean-showcase",
        min_dim: 1,
        default_dim: 2,
        summary: "squared norm on [-5,5]^d, g(x,y) = <x, y-x>, T_i = projection onto {x_i <= 1}; Ω = {0}",
    },
    InstanceInfo {
        name: "entropy-simplex",
        min_dim: 2,
        default_dim: 3,
        summary: "negative entropy on the simplex, h(y) = max_k 2^k y_k, two entropic halfspace projections; Ω = {p}, p_k ∝ 2^-k",
    },
    InstanceInfo {
        name: "limit-probe",
        min_dim: 2,
        default_dim: 2,
        summary: "squared norm on [-5,5]^d, g = 0, T_1 = projection onto {1 <= x_0 <= 3}, T_2 = projection onto {x_1 = 0}; Ω a segment",
    },
    InstanceInfo {
        name: "linear-kumam",
        min_dim: 1,
        default_dim: 2,
        summary: "squared norm on [-1000,1000]^d, g(x,y) = <Ax, y-x> with A = I + skew, T = projection onto a hyperplane through 0; Ω = {0}",
    },
];

pub fn instance_info(name: &str) -> Result<&'static InstanceInfo> {
    CATALOG.iter().find(|i| i.name == name).ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|i| i.name).collect();
        Error::argument(format!("unknown instance '{name}'; known: {}", names.join(", ")))
    })
}

/// `x` uniform in `[lo, hi]^d`.
fn uniform_point(rng: &mut ChaCha20Rng, d: usize, lo: f64, hi: f64) -> Point {
    Point((0..d).map(|_| rng.gen_range(lo..hi)).collect())
}

/// Builds a catalog instance; deterministic in `(name, d, seed)`.
pub fn generate_instance(name: &str, d: usize, seed: u64) -> Result<ProblemInstance> {
    let info = instance_info(name)?;
    if d < info.min_dim {
        return Err(Error::argument(format!(
            "instance '{name}' needs dimension >= {}",
            info.min_dim
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sq = LegendreFunction::SquaredNorm;
    let problem = match name {
        "degenerate-identity" => {
            let c = ConvexSet::cube(d, -1.0, 1.0)?;
            ProblemInstance {
                name: name.into(),
                f: sq,
                set: c.clone(),
                bifunctions: vec![Bifunction::zero(c.clone())],
                operators: vec![QbneOperator::identity()],
                reference_solution: Some(Point::zeros(d)),
                solution_set: Some(c),
                default_start: Some(uniform_point(&mut rng, d, -1.0, 1.0)),
            }
        }
        "euclidean-showcase" => {
            let c = ConvexSet::cube(d, -5.0, 5.0)?;
            let g = Bifunction::linear_monotone(DMatrix::identity(d, d), vec![0.0; d], c.clone())?;
            let operators = (0..d)
                .map(|i| {
                    let mut a = vec![0.0; d];
                    a[i] = 1.0;
                    Ok(QbneOperator::projection(sq.clone(), ConvexSet::halfspace(a, 1.0)?))
                })
                .collect::<Result<Vec<_>>>()?;
            ProblemInstance {
                name: name.into(),
                f: sq,
                set: c,
                bifunctions: vec![g],
                operators,
                reference_solution: Some(Point::zeros(d)),
                solution_set: Some(ConvexSet::singleton(&vec![0.0; d])?),
                default_start: Some(uniform_point(&mut rng, d, -5.0, 5.0)),
            }
        }
        "entropy-simplex" => {
            let f = LegendreFunction::NegativeEntropy;
            let c = ConvexSet::simplex(d, 1.0)?;
            let weights: Vec<f64> = (1..=d).map(|k| 2f64.powi(k as i32)).collect();
            let g = Bifunction::proximal(Potential::max_weighted_coords(&weights), c.clone())?;
            let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
            let total: f64 = inv.iter().sum();
            let p = Point(inv.iter().map(|v| v / total).collect());
            let mut first_last = vec![0.0; d];
            first_last[0] = -1.0;
            first_last[d - 1] += 1.0;
            let mut second = vec![0.0; d];
            second[1] = 1.0;
            let operators = vec![
                QbneOperator::projection(f.clone(), ConvexSet::halfspace(first_last, 0.0)?),
                QbneOperator::projection(f.clone(), ConvexSet::halfspace(second, 0.5)?),
            ];
            let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.0)).collect();
            let s: f64 = raw.iter().sum();
            ProblemInstance {
                name: name.into(),
                f,
                set: c,
                bifunctions: vec![g],
                operators,
                reference_solution: Some(p.clone()),
                solution_set: Some(ConvexSet::singleton(&p)?),
                default_start: Some(Point(raw.iter().map(|v| v / s).collect())),
            }
        }
        "limit-probe" => {
            let c = ConvexSet::cube(d, -5.0, 5.0)?;
            let mut lo = vec![-5.0; d];
            let mut hi = vec![5.0; d];
            lo[0] = 1.0;
            hi[0] = 3.0;
            let slab = ConvexSet::boxed(lo.clone(), hi.clone())?;
            let mut axis = vec![0.0; d];
            axis[1] = 1.0;
            lo[1] = 0.0;
            hi[1] = 0.0;
            let mut start = uniform_point(&mut rng, d, -1.0, 1.0);
            start.0[0] = 2.5;
            start.0[1] = 4.0;
            ProblemInstance {
                name: name.into(),
                f: sq.clone(),
                set: c.clone(),
                bifunctions: vec![Bifunction::zero(c)],
                operators: vec![
                    QbneOperator::projection(sq.clone(), slab),
                    QbneOperator::projection(sq, ConvexSet::hyperplane(axis, 0.0)?),
                ],
                reference_solution: Some({
                    let mut p = Point::zeros(d);
                    p.0[0] = 2.0;
                    p
                }),
                solution_set: Some(ConvexSet::boxed(lo, hi)?),
                default_start: Some(start),
            }
        }
        "linear-kumam" => {
            let c = ConvexSet::cube(d, -1e3, 1e3)?;
            let mut a = DMatrix::identity(d, d);
            for i in 0..d.saturating_sub(1) {
                a[(i, i + 1)] = 0.5;
                a[(i + 1, i)] = -0.5;
            }
            let g = Bifunction::linear_monotone(a, vec![0.0; d], c.clone())?;
            let normal: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
            ProblemInstance {
                name: name.into(),
                f: sq.clone(),
                set: c,
                bifunctions: vec![g],
                operators: vec![QbneOperator::projection(sq, ConvexSet::hyperplane(normal, 0.0)?)],
                reference_solution: Some(Point::zeros(d)),
                solution_set: Some(ConvexSet::singleton(&vec![0.0; d])?),
                default_start: Some(uniform_point(&mut rng, d, -2.0, 2.0)),
            }
        }
        _ => unreachable!("catalog lookup succeeded"),
    };
    problem.validate()?;
    Ok(problem)
}
