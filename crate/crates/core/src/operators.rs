//! Quasi-Bregman nonexpansive self-maps: Bregman projections, resolvents and
//! their compositions.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{resolve, Bifunction};
use crate::error::{Error, Result};
use crate::geometry::{LegendreFunction, Point};
use crate::linalg::dist;
use crate::projection::bregman_project;
use crate::sets::ConvexSet;
use crate::tol;

fn default_resolvent_tol() -> f64 {
    tol::INNER_SOLVE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorKind {
    /// `P^f_C`
    Projection { f: LegendreFunction, set: ConvexSet },
    /// `Res^f_g`, solved to `tol`
    Resolvent {
        f: LegendreFunction,
        g: Bifunction,
        #[serde(default = "default_resolvent_tol")]
        tol: f64,
    },
    /// `factors[k-1] ∘ … ∘ factors[0]`: the first factor is applied first.
    /// An empty composition is the identity.
    Composition { factors: Vec<QbneOperator> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QbneOperator {
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_fixed_point: Option<Point>,
}

impl QbneOperator {
    pub fn projection(f: LegendreFunction, set: ConvexSet) -> Self {
        QbneOperator {
            kind: OperatorKind::Projection { f, set },
            known_fixed_point: None,
        }
    }

    pub fn resolvent(f: LegendreFunction, g: Bifunction) -> Self {
        QbneOperator {
            kind: OperatorKind::Resolvent {
                f,
                g,
                tol: tol::INNER_SOLVE,
            },
            known_fixed_point: None,
        }
    }

    pub fn composition(factors: Vec<QbneOperator>) -> Self {
        QbneOperator {
            kind: OperatorKind::Composition { factors },
            known_fixed_point: None,
        }
    }

    pub fn identity() -> Self {
        Self::composition(Vec::new())
    }

    /// Attaches a fixed-point witness after checking `‖T(p) - p‖ ≤ 1e-7`.
    pub fn with_fixed_point(mut self, p: Point) -> Result<Self> {
        let tp = self.apply(&p)?;
        let gap = dist(&tp, &p);
        if gap > tol::VI_RESIDUAL {
            return Err(Error::argument(format!("declared fixed point moves by {gap:e}")));
        }
        self.known_fixed_point = Some(p);
        Ok(self)
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        match &self.kind {
            OperatorKind::Projection { f, set } => bregman_project(f, set, x),
            OperatorKind::Resolvent { f, g, tol } => resolve(f, g, x, *tol),
            OperatorKind::Composition { factors } => {
                let mut y = x.clone();
                for t in factors {
                    y = t.apply(&y)?;
                }
                Ok(y)
            }
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            OperatorKind::Projection { .. } => "projection".into(),
            OperatorKind::Resolvent { .. } => "resolvent".into(),
            OperatorKind::Composition { factors } if factors.is_empty() => "identity".into(),
            OperatorKind::Composition { factors } => format!(
                "composition({})",
                factors.iter().map(QbneOperator::label).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

pub fn apply(t: &QbneOperator, x: &Point) -> Result<Point> {
    t.apply(x)
}

/// `T_[n]` for the 1-based iteration index `n`: `family[(n - 1) mod N]`.
pub fn cyclic_select(family: &[QbneOperator], n: usize) -> Result<&QbneOperator> {
    if family.is_empty() {
        return Err(Error::argument("operator family is empty"));
    }
    if n == 0 {
        return Err(Error::argument("iteration indices start at 1"));
    }
    Ok(&family[(n - 1) % family.len()])
}

/// `D_f(p, x) - D_f(p, T(x))` for a fixed point `p` of `T`.
pub fn qbne_gap(t: &QbneOperator, f: &LegendreFunction, p: &Point, x: &Point) -> Result<f64> {
    let tp = t.apply(p)?;
    if dist(&tp, p) > tol::VI_RESIDUAL {
        return Err(Error::argument("reference point is not a fixed point of the operator"));
    }
    let tx = t.apply(x)?;
    Ok(f.bregman_distance(p, x)? - f.bregman_distance(p, &tx)?)
}
