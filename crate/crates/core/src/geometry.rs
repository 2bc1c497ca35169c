//! Legendre functions on `R^d` and the Bregman-distance algebra built on them.
//!
//! All built-in kinds are finite and differentiable on the interior of their
//! domain, with a closed-form conjugate:
//!
//! | kind              | `f(x)`                 | `∇f(x)`              | `∇f*(x*)`                   |
//! |-------------------|------------------------|----------------------|-----------------------------|
//! | `SquaredNorm`     | `½‖x‖²`                | `x`                  | `x*`                        |
//! | `QuadraticForm`   | `½ xᵀQx`               | `Qx`                 | `Q⁻¹x*`                     |
//! | `PNorm { p }`     | `(1/p) Σ |xᵢ|^p`       | `sign(xᵢ)|xᵢ|^(p-1)` | `sign(x*ᵢ)|x*ᵢ|^(q-1)`      |
//! | `NegativeEntropy` | `Σ xᵢ log xᵢ`          | `1 + log xᵢ`         | `exp(x*ᵢ - 1)`              |
//!
//! `PNorm` is the separable p-th power, not `(1/p)‖x‖_p^p` of a non-separable
//! norm; this keeps `∇f` and `∇f*` componentwise. `q = p / (p - 1)`.
//!
//! `NegativeEntropy` lives on the open positive orthant. Points outside the
//! domain produce [`Error::Domain`] rather than `+∞`.

use std::fmt;
use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, matrix_rows, norm, sub};
use crate::tol;

/// A point of the primal space `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

/// A point of the dual space, paired with [`Point`] through the Euclidean inner product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualPoint(pub Vec<f64>);

macro_rules! vector_newtype {
    ($t:ident) => {
        impl $t {
            pub fn new(coords: Vec<f64>) -> Self {
                $t(coords)
            }

            pub fn zeros(d: usize) -> Self {
                $t(vec![0.0; d])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $t {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $t {
            fn from(v: Vec<f64>) -> Self {
                $t(v)
            }
        }

        impl<const N: usize> From<[f64; N]> for $t {
            fn from(v: [f64; N]) -> Self {
                $t(v.to_vec())
            }
        }
    };
}

vector_newtype!(Point);
vector_newtype!(DualPoint);

/// Symmetric positive-definite matrix with a cached Cholesky factor.
#[derive(Clone)]
pub struct SpdMatrix {
    q: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() || q.nrows() == 0 {
            return Err(Error::argument("quadratic form must be a nonempty square matrix"));
        }
        if !all_finite(q.as_slice()) {
            return Err(Error::argument("quadratic form has non-finite entries"));
        }
        let scale = q.abs().max().max(1.0);
        if (&q - q.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::argument("quadratic form must be symmetric"));
        }
        let chol =
            Cholesky::new(q.clone()).ok_or_else(|| Error::argument("quadratic form must be positive definite"))?;
        Ok(SpdMatrix { q, chol })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_rows::from_rows(rows).map_err(Error::Argument)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::matvec(&self.q, x)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.chol.solve(&rhs).as_slice().to_vec()
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpdMatrix")
            .field(&matrix_rows::to_rows(&self.q))
            .finish()
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_rows::serialize(&self.q, s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = matrix_rows::deserialize(d)?;
        SpdMatrix::new(q).map_err(serde::de::Error::custom)
    }
}

/// A Legendre function with closed-form gradient and conjugate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LegendreFunction {
    SquaredNorm,
    QuadraticForm { q: SpdMatrix },
    PNorm { p: f64 },
    NegativeEntropy,
}

/// Interior of the domain of a Legendre function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Whole,
    PositiveOrthant,
}

impl LegendreFunction {
    pub fn p_norm(p: f64) -> Result<Self> {
        let f = LegendreFunction::PNorm { p };
        f.validate()?;
        Ok(f)
    }

    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        Ok(LegendreFunction::QuadraticForm { q: SpdMatrix::new(q)? })
    }

    /// Checks parameters that deserialization alone cannot enforce.
    pub fn validate(&self) -> Result<()> {
        match self {
            LegendreFunction::PNorm { p } if !(p.is_finite() && *p > 1.0) => {
                Err(Error::argument(format!("p-norm exponent must be > 1, got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn domain(&self) -> DomainKind {
        match self {
            LegendreFunction::NegativeEntropy => DomainKind::PositiveOrthant,
            _ => DomainKind::Whole,
        }
    }

    /// True for kinds whose value, gradient and conjugate act coordinatewise.
    pub fn is_separable(&self) -> bool {
        !matches!(self, LegendreFunction::QuadraticForm { .. })
    }

    pub fn name(&self) -> String {
        match self {
            LegendreFunction::SquaredNorm => "squared_norm".into(),
            LegendreFunction::QuadraticForm { .. } => "quadratic_form".into(),
            LegendreFunction::PNorm { p } => format!("p_norm({p})"),
            LegendreFunction::NegativeEntropy => "negative_entropy".into(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.is_empty() {
            return Err(Error::argument("points must have dimension >= 1"));
        }
        if let LegendreFunction::QuadraticForm { q } = self {
            if q.dim() != x.len() {
                return Err(Error::argument(format!(
                    "dimension {} does not match quadratic form of size {}",
                    x.len(),
                    q.dim()
                )));
            }
        }
        Ok(())
    }

    /// Fails unless `x` lies in `int dom f`.
    pub fn check_interior(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if !all_finite(x) {
            return Err(Error::domain("point has non-finite coordinates"));
        }
        if self.domain() == DomainKind::PositiveOrthant {
            if let Some(v) = x.iter().find(|v| **v <= tol::ENTROPY_FLOOR) {
                return Err(Error::domain(format!(
                    "coordinate {v:e} outside the open positive orthant"
                )));
            }
        }
        Ok(())
    }

    /// Fails unless `x` lies in `dom f` (the closed orthant for entropy).
    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if !all_finite(x) {
            return Err(Error::domain("point has non-finite coordinates"));
        }
        if self.domain() == DomainKind::PositiveOrthant && x.iter().any(|v| *v < 0.0) {
            return Err(Error::domain("negative coordinate outside the entropy domain"));
        }
        Ok(())
    }

    fn check_dual(&self, xs: &[f64]) -> Result<()> {
        self.check_dim(xs)?;
        if !all_finite(xs) {
            return Err(Error::domain("dual point has non-finite coordinates"));
        }
        Ok(())
    }

    /// `f(x)` for `x ∈ int dom f`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_interior(x)?;
        Ok(self.value_unchecked(x))
    }

    /// `f(y)` on the closed domain; entropy uses `0 log 0 = 0`.
    pub fn value_on_domain(&self, y: &[f64]) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.value_unchecked(y))
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            LegendreFunction::SquaredNorm => 0.5 * dot(x, x),
            LegendreFunction::QuadraticForm { q } => 0.5 * dot(x, &q.apply(x)),
            LegendreFunction::PNorm { p } => x.iter().map(|v| v.abs().powf(*p)).sum::<f64>() / p,
            LegendreFunction::NegativeEntropy => x.iter().map(|v| if *v == 0.0 { 0.0 } else { v * v.ln() }).sum(),
        }
    }

    /// `∇f(x)` for `x ∈ int dom f`.
    pub fn gradient(&self, x: &[f64]) -> Result<DualPoint> {
        self.check_interior(x)?;
        let g = match self {
            LegendreFunction::SquaredNorm => x.to_vec(),
            LegendreFunction::QuadraticForm { q } => q.apply(x),
            LegendreFunction::PNorm { p } => x.iter().map(|v| signed_pow(*v, p - 1.0)).collect(),
            LegendreFunction::NegativeEntropy => x.iter().map(|v| 1.0 + v.ln()).collect(),
        };
        Ok(DualPoint(g))
    }

    /// `f*(x*)`.
    pub fn conjugate(&self, xs: &[f64]) -> Result<f64> {
        self.check_dual(xs)?;
        let v = match self {
            LegendreFunction::SquaredNorm => 0.5 * dot(xs, xs),
            LegendreFunction::QuadraticForm { q } => 0.5 * dot(xs, &q.solve(xs)),
            LegendreFunction::PNorm { p } => {
                let q = conjugate_exponent(*p);
                xs.iter().map(|v| v.abs().powf(q)).sum::<f64>() / q
            }
            LegendreFunction::NegativeEntropy => xs.iter().map(|v| (v - 1.0).exp()).sum(),
        };
        if !v.is_finite() {
            return Err(Error::domain("conjugate value overflows"));
        }
        Ok(v)
    }

    /// `∇f*(x*)`, the inverse of [`gradient`](Self::gradient).
    pub fn conjugate_gradient(&self, xs: &[f64]) -> Result<Point> {
        self.check_dual(xs)?;
        let x = self.conjugate_gradient_raw(xs);
        self.check_interior(&x)
            .map_err(|e| Error::domain(format!("conjugate gradient leaves the domain: {e}")))?;
        Ok(Point(x))
    }

    /// `∇f*(x*)` without domain checks; may contain `0` or `∞` on overflow.
    pub(crate) fn conjugate_gradient_raw(&self, xs: &[f64]) -> Vec<f64> {
        match self {
            LegendreFunction::SquaredNorm => xs.to_vec(),
            LegendreFunction::QuadraticForm { q } => q.solve(xs),
            LegendreFunction::PNorm { p } => {
                let q = conjugate_exponent(*p);
                xs.iter().map(|v| signed_pow(*v, q - 1.0)).collect()
            }
            LegendreFunction::NegativeEntropy => xs.iter().map(|v| (v - 1.0).exp()).collect(),
        }
    }

    /// `aᵀ ∇²f*(x*) a`; may be `+∞` where `f*` is not twice differentiable.
    pub(crate) fn conjugate_curvature(&self, xs: &[f64], a: &[f64]) -> f64 {
        match self {
            LegendreFunction::SquaredNorm => dot(a, a),
            LegendreFunction::QuadraticForm { q } => dot(a, &q.solve(a)),
            LegendreFunction::PNorm { p } => {
                let q = conjugate_exponent(*p);
                xs.iter()
                    .zip(a)
                    .map(|(v, ai)| {
                        if *ai == 0.0 {
                            0.0
                        } else {
                            (q - 1.0) * v.abs().powf(q - 2.0) * ai * ai
                        }
                    })
                    .sum()
            }
            LegendreFunction::NegativeEntropy => xs.iter().zip(a).map(|(v, ai)| (v - 1.0).exp() * ai * ai).sum(),
        }
    }

    /// `D_f(y, x) = f(y) - f(x) - ⟨∇f(x), y - x⟩` for `y ∈ dom f`, `x ∈ int dom f`.
    pub fn bregman_distance(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        self.check_interior(x)?;
        self.check_domain(y)?;
        if y.len() != x.len() {
            return Err(Error::argument("dimension mismatch in Bregman distance"));
        }
        // Algebraically equal to the definition, arranged to avoid cancellation.
        let d = match self {
            LegendreFunction::SquaredNorm => {
                let r = sub(y, x);
                0.5 * dot(&r, &r)
            }
            LegendreFunction::QuadraticForm { q } => {
                let r = sub(y, x);
                0.5 * dot(&r, &q.apply(&r))
            }
            LegendreFunction::PNorm { p } => y
                .iter()
                .zip(x)
                .map(|(yi, xi)| (yi.abs().powf(*p) - xi.abs().powf(*p)) / p - signed_pow(*xi, p - 1.0) * (yi - xi))
                .sum(),
            LegendreFunction::NegativeEntropy => y
                .iter()
                .zip(x)
                .map(|(yi, xi)| {
                    let t = if *yi == 0.0 { 0.0 } else { yi * (yi / xi).ln() };
                    t - yi + xi
                })
                .sum(),
        };
        Ok(d)
    }
}

fn signed_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

fn same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::argument(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn eval_f(f: &LegendreFunction, x: &Point) -> Result<f64> {
    f.value(x)
}

pub fn grad_f(f: &LegendreFunction, x: &Point) -> Result<DualPoint> {
    f.gradient(x)
}

pub fn grad_conj(f: &LegendreFunction, xstar: &DualPoint) -> Result<Point> {
    f.conjugate_gradient(xstar)
}

pub fn bregman_distance(f: &LegendreFunction, y: &Point, x: &Point) -> Result<f64> {
    f.bregman_distance(y, x)
}

/// Residual of the three-point identity
/// `D(z,x) = D(z,y) + D(y,x) + ⟨∇f(y) - ∇f(x), z - y⟩`.
pub fn three_point_gap(f: &LegendreFunction, z: &Point, y: &Point, x: &Point) -> Result<f64> {
    same_dim(z, y)?;
    same_dim(y, x)?;
    let gy = f.gradient(y)?;
    let gx = f.gradient(x)?;
    let cross = dot(&sub(&gy, &gx), &sub(z, y));
    Ok(f.bregman_distance(z, x)? - (f.bregman_distance(z, y)? + f.bregman_distance(y, x)? + cross))
}

/// Residual of the chain identity
/// `D(y₁,y_N) = Σ_{k≥2} D(y_{k-1},y_k) + Σ_{k≥3} ⟨∇f(y_{k-1}) - ∇f(y_k), y₁ - y_{k-1}⟩`.
pub fn chain_gap(f: &LegendreFunction, ys: &[Point]) -> Result<f64> {
    let n = ys.len();
    if n < 2 {
        return Err(Error::argument("chain identity needs at least two points"));
    }
    for y in ys {
        same_dim(y, &ys[0])?;
        f.check_interior(y)?;
    }
    let grads = ys.iter().map(|y| f.gradient(y)).collect::<Result<Vec<_>>>()?;
    let mut rhs = 0.0;
    for k in 1..n {
        rhs += f.bregman_distance(&ys[k - 1], &ys[k])?;
    }
    for k in 2..n {
        rhs += dot(&sub(&grads[k - 1], &grads[k]), &sub(&ys[0], &ys[k - 1]));
    }
    Ok(f.bregman_distance(&ys[0], &ys[n - 1])? - rhs)
}

/// `V(x, x*) = f(x) - ⟨x, x*⟩ + f*(x*)`.
pub fn v_fn(f: &LegendreFunction, x: &Point, xstar: &DualPoint) -> Result<f64> {
    same_dim(x, xstar)?;
    Ok(f.value_on_domain(x)? - dot(x, xstar) + f.conjugate(xstar)?)
}

/// `∇f*(Σ tᵢ ∇f(xᵢ))` for positive weights summing to one.
pub fn dual_average(f: &LegendreFunction, weights: &[f64], points: &[Point]) -> Result<Point> {
    if weights.is_empty() || weights.len() != points.len() {
        return Err(Error::argument("need one weight per point and at least one point"));
    }
    if weights.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::argument("weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::argument(format!("weights sum to {total}, not 1")));
    }
    let d = points[0].dim();
    let mut acc = vec![0.0; d];
    for (t, x) in weights.iter().zip(points) {
        same_dim(x, &points[0])?;
        let g = f.gradient(x)?;
        for (a, gi) in acc.iter_mut().zip(g.iter()) {
            *a += t * gi;
        }
    }
    f.conjugate_gradient(&acc)
}

/// Sampled upper bound on the modulus of total convexity
/// `inf { D_f(y, x) : ‖y - x‖ = t }`, using uniformly random directions.
pub fn total_convexity_estimate<R: Rng + ?Sized>(
    f: &LegendreFunction,
    x: &Point,
    t: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    f.check_interior(x)?;
    if !(t > 0.0 && t.is_finite()) || n_samples == 0 {
        return Err(Error::argument("need t > 0 and at least one sample"));
    }
    let mut best = f64::INFINITY;
    for _ in 0..n_samples {
        let mut u: Vec<f64> = (0..x.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let nu = norm(&u);
        if nu == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v *= t / nu);
        let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
        if f.check_domain(&y).is_err() {
            continue;
        }
        best = best.min(f.bregman_distance(&y, x)?);
    }
    if best.is_infinite() {
        return Err(Error::domain("every sampled direction leaves dom f"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const E: f64 = std::f64::consts::E;

    fn q22() -> LegendreFunction {
        LegendreFunction::quadratic(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0])).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn close_vec(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            close(*x, *y, tol);
        }
    }

    #[test]
    fn eval_examples() {
        close(
            eval_f(&LegendreFunction::SquaredNorm, &[3.0, 4.0].into()).unwrap(),
            12.5,
            0.0,
        );
        close(
            eval_f(&LegendreFunction::NegativeEntropy, &[1.0, 1.0].into()).unwrap(),
            0.0,
            0.0,
        );
        // ½ xᵀQx evaluated directly with nalgebra.
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = nalgebra::DVector::from_vec(vec![1.0, 1.0]);
        let oracle = 0.5 * x.dot(&(&q * &x));
        close(eval_f(&q22(), &[1.0, 1.0].into()).unwrap(), oracle, 1e-15);
        close(oracle, 3.0, 0.0);
    }

    #[test]
    fn gradient_examples() {
        let g = grad_f(&LegendreFunction::SquaredNorm, &[3.0, 4.0].into()).unwrap();
        assert_eq!(g.0, vec![3.0, 4.0]);
        let g = grad_f(&LegendreFunction::NegativeEntropy, &[1.0, E].into()).unwrap();
        close_vec(&g, &[1.0, 2.0], 1e-15);
        let g = grad_f(&LegendreFunction::p_norm(4.0).unwrap(), &[1.0, -2.0].into()).unwrap();
        close_vec(&g, &[1.0, -8.0], 1e-12);
    }

    #[test]
    fn conjugate_gradient_examples() {
        let x = grad_conj(&LegendreFunction::SquaredNorm, &[3.0, 4.0].into()).unwrap();
        assert_eq!(x.0, vec![3.0, 4.0]);
        let x = grad_conj(&LegendreFunction::NegativeEntropy, &[1.0, 2.0].into()).unwrap();
        close_vec(&x, &[1.0, E], 1e-15);
        let x = grad_conj(&q22(), &[2.0, -4.0].into()).unwrap();
        close_vec(&x, &[1.0, -1.0], 1e-15);
    }

    #[test]
    fn entropy_rejects_nonpositive() {
        let f = LegendreFunction::NegativeEntropy;
        assert!(matches!(f.value(&[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(f.gradient(&[-1.0]), Err(Error::Domain(_))));
        assert!(matches!(f.bregman_distance(&[1.0], &[0.0]), Err(Error::Domain(_))));
        // y on the boundary of dom f is allowed in the first slot.
        close(f.bregman_distance(&[0.0], &[1.0]).unwrap(), 1.0, 1e-15);
        // exp underflow leaves the open orthant.
        assert!(matches!(f.conjugate_gradient(&[-800.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters() {
        assert!(LegendreFunction::p_norm(1.0).is_err());
        assert!(LegendreFunction::quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(LegendreFunction::quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(matches!(q22().value(&[1.0, 2.0, 3.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn bregman_examples() {
        let d = bregman_distance(&LegendreFunction::SquaredNorm, &[1.0, 2.0].into(), &[0.0, 0.0].into()).unwrap();
        close(d, 2.5, 1e-15);
        let f = LegendreFunction::NegativeEntropy;
        // f(y) - f(x) - ⟨∇f(x), y - x⟩ with f(2) = 2 log 2, f(1) = 0, ∇f(1) = 1.
        let oracle = 2.0 * 2f64.ln() - 0.0 - 1.0 * (2.0 - 1.0);
        close(f.bregman_distance(&[2.0], &[1.0]).unwrap(), oracle, 1e-15);
        close(oracle, 0.386294, 1e-6);
        for f in [
            LegendreFunction::SquaredNorm,
            q22(),
            LegendreFunction::p_norm(3.0).unwrap(),
        ] {
            assert_eq!(f.bregman_distance(&[0.3, -1.2], &[0.3, -1.2]).unwrap(), 0.0);
        }
    }

    #[test]
    fn three_point_examples() {
        let f = LegendreFunction::NegativeEntropy;
        let p: Point = [1.0, 1.0].into();
        assert_eq!(three_point_gap(&f, &p, &p, &p).unwrap(), 0.0);
        // Evaluate both sides from the raw definition.
        let raw = |y: [f64; 2], x: [f64; 2]| {
            let fv = |v: [f64; 2]| v[0] * v[0].ln() + v[1] * v[1].ln();
            fv(y) - fv(x) - ((1.0 + x[0].ln()) * (y[0] - x[0]) + (1.0 + x[1].ln()) * (y[1] - x[1]))
        };
        let (z, y, x): ([f64; 2], [f64; 2], [f64; 2]) = ([1.0, 2.0], [2.0, 1.0], [1.0, 1.0]);
        let cross = ((1.0 + y[0].ln()) - (1.0 + x[0].ln())) * (z[0] - y[0])
            + ((1.0 + y[1].ln()) - (1.0 + x[1].ln())) * (z[1] - y[1]);
        let oracle_gap = raw(z, x) - (raw(z, y) + raw(y, x) + cross);
        assert!(oracle_gap.abs() <= 1e-10);
        let gap = three_point_gap(&f, &z.into(), &y.into(), &x.into()).unwrap();
        assert!(gap.abs() <= 1e-10, "{gap}");
    }

    #[test]
    fn chain_needs_two_points() {
        let f = LegendreFunction::SquaredNorm;
        assert!(matches!(chain_gap(&f, &[[1.0].into()]), Err(Error::Argument(_))));
        let pts: Vec<Point> = vec![[0.5, 1.0].into(), [2.0, -1.0].into()];
        assert_eq!(chain_gap(&f, &pts).unwrap(), 0.0);
    }

    #[test]
    fn v_function_examples() {
        let f = LegendreFunction::SquaredNorm;
        close(v_fn(&f, &[0.0, 0.0].into(), &[1.0, 1.0].into()).unwrap(), 1.0, 1e-15);
        let e = LegendreFunction::NegativeEntropy;
        let x: Point = [1.5, 0.5].into();
        let g = e.gradient(&x).unwrap();
        assert!(v_fn(&e, &x, &g).unwrap().abs() <= 1e-12);
        // V(x, x*) = D(x, ∇f*(x*)) with ∇f*(1,1) = (1,1): D((1,1),(1,1)) = 0.
        let v = v_fn(&e, &[1.0, 1.0].into(), &[1.0, 1.0].into()).unwrap();
        let d = e
            .bregman_distance(&[1.0, 1.0], &e.conjugate_gradient(&[1.0, 1.0]).unwrap())
            .unwrap();
        close(v, d, 1e-12);
    }

    #[test]
    fn dual_average_examples() {
        let f = LegendreFunction::SquaredNorm;
        let single = dual_average(&f, &[1.0], &[[0.7, -0.2].into()]).unwrap();
        close_vec(&single, &[0.7, -0.2], 1e-15);
        let mid = dual_average(&f, &[0.5, 0.5], &[[0.0, 0.0].into(), [2.0, 2.0].into()]).unwrap();
        close_vec(&mid, &[1.0, 1.0], 1e-15);
        let e = LegendreFunction::NegativeEntropy;
        let gm = dual_average(&e, &[0.5, 0.5], &[[1.0, 4.0].into(), [4.0, 1.0].into()]).unwrap();
        close_vec(&gm, &[2.0, 2.0], 1e-12);
    }

    #[test]
    fn dual_average_rejects_bad_weights() {
        let f = LegendreFunction::SquaredNorm;
        let pts: Vec<Point> = vec![[0.0].into(), [1.0].into()];
        assert!(dual_average(&f, &[0.5, 0.6], &pts).is_err());
        assert!(dual_average(&f, &[1.5, -0.5], &pts).is_err());
        assert!(dual_average(&f, &[1.0], &pts).is_err());
    }

    #[test]
    fn total_convexity_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let f = LegendreFunction::SquaredNorm;
        let v = total_convexity_estimate(&f, &[0.3, 2.0, -1.0].into(), 1.0, 50, &mut rng).unwrap();
        close(v, 0.5, 1e-12);
        let e = LegendreFunction::NegativeEntropy;
        let v = total_convexity_estimate(&e, &[1.0, 1.0].into(), 0.1, 1000, &mut rng).unwrap();
        assert!(v > 0.0);
        let small = total_convexity_estimate(&e, &[1.0, 1.0].into(), 1e-6, 100, &mut rng).unwrap();
        assert!(small < 1e-11 && small > 0.0);
        let err = total_convexity_estimate(&e, &[0.0, 1.0].into(), 1.0, 10, &mut rng);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn serde_tagging() {
        let f: LegendreFunction = serde_json::from_str(r#"{"kind":"p_norm","p":3.0}"#).unwrap();
        assert_eq!(f, LegendreFunction::PNorm { p: 3.0 });
        let q: LegendreFunction = serde_json::from_str(r#"{"kind":"quadratic_form","q":[[2,0],[0,4]]}"#).unwrap();
        assert_eq!(q, q22());
        assert!(serde_json::from_str::<LegendreFunction>(r#"{"kind":"quadratic_form","q":[[1,2],[2,1]]}"#).is_err());
    }
}
