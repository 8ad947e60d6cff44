//! The four ranging objectives and their analytic derivatives.
//!
//! All objectives are sums of squared residuals, `F = Σ r_i²`, carrying the
//! ¼ prefactor through a ½ inside each residual:
//!
//! * `F1`:  `r_i = ½ (|p − a_i| − d_i)`
//! * `F2`:  `r_i = ½ (|p − a_i|² − d_i²)`
//! * `FL1`: `r_i = ½ (√(|p − a_i|² + λ²) − d_i)`
//! * `FL2`: `r_i = ½ (|p − a_i|² + λ² − d_i²)`
//!
//! The lifted kinds append `λ` as one extra parameter after the position
//! coordinates. With `λ = 0` they reduce bit-for-bit to their unlifted
//! counterparts.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DistanceSet, Position, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectiveKind {
    F1,
    F2,
    FL1,
    FL2,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [Self::F1, Self::F2, Self::FL1, Self::FL2];

    pub fn is_lifted(self) -> bool {
        matches!(self, Self::FL1 | Self::FL2)
    }

    /// Residuals are raw ranges (square-root form) rather than squared ranges.
    pub fn is_range_form(self) -> bool {
        matches!(self, Self::F1 | Self::FL1)
    }

    pub fn unlifted(self) -> Self {
        match self {
            Self::F1 | Self::FL1 => Self::F1,
            Self::F2 | Self::FL2 => Self::F2,
        }
    }

    pub fn lifted(self) -> Self {
        match self {
            Self::F1 | Self::FL1 => Self::FL1,
            Self::F2 | Self::FL2 => Self::FL2,
        }
    }

    pub fn n_params(self, dim: usize) -> usize {
        dim + usize::from(self.is_lifted())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::F1 => "F1",
            Self::F2 => "F2",
            Self::FL1 => "FL1",
            Self::FL2 => "FL2",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "F1" => Ok(Self::F1),
            "F2" => Ok(Self::F2),
            "FL1" => Ok(Self::FL1),
            "FL2" => Ok(Self::FL2),
            other => Err(Error::InvalidConfig(format!(
                "unknown objective kind `{other}`"
            ))),
        }
    }
}

/// Search state: a position plus the lifting variable for lifted kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub position: Position,
    pub lambda: Option<f64>,
}

impl ParameterVector {
    pub fn unlifted(position: Position) -> Self {
        Self {
            position,
            lambda: None,
        }
    }

    pub fn lifted(position: Position, lambda: f64) -> Self {
        Self {
            position,
            lambda: Some(lambda),
        }
    }

    /// Builds the parameter vector expected by `kind`, using `lambda` only
    /// when the kind is lifted.
    pub fn for_kind(kind: ObjectiveKind, position: Position, lambda: f64) -> Self {
        if kind.is_lifted() {
            Self::lifted(position, lambda)
        } else {
            Self::unlifted(position)
        }
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }

    pub fn len(&self) -> usize {
        self.dim() + usize::from(self.lambda.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.position.coords().to_vec();
        v.extend(self.lambda);
        DVector::from_vec(v)
    }

    /// Inverse of [`to_vector`](Self::to_vector) for a given kind.
    pub fn from_vector(kind: ObjectiveKind, v: &DVector<f64>) -> Result<Self> {
        let dim = if kind.is_lifted() {
            v.len()
                .checked_sub(1)
                .ok_or(Error::LambdaMismatch { kind })?
        } else {
            v.len()
        };
        let position = Position::new(v.rows(0, dim).iter().copied().collect())?;
        let lambda = kind.is_lifted().then(|| v[dim]);
        if lambda.is_some_and(|l| !l.is_finite()) {
            return Err(Error::NonFinite("lambda"));
        }
        Ok(Self { position, lambda })
    }

    fn check(&self, kind: ObjectiveKind, scenario: &Scenario) -> Result<()> {
        if self.dim() != scenario.dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.dim(),
                found: self.dim(),
            });
        }
        if self.lambda.is_some() != kind.is_lifted() {
            return Err(Error::LambdaMismatch { kind });
        }
        if self.lambda.is_some_and(|l| !l.is_finite()) {
            return Err(Error::NonFinite("lambda"));
        }
        Ok(())
    }
}

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Per-station offset `u_i = (p − a_i, λ)` and its squared norm.
fn offsets(scenario: &Scenario, p: &ParameterVector) -> Vec<(DVector<f64>, f64)> {
    let pos = p.position.coords();
    scenario
        .stations()
        .iter()
        .map(|station| {
            let mut u: Vec<f64> = pos
                .iter()
                .zip(station.coords())
                .map(|(x, a)| x - a)
                .collect();
            u.extend(p.lambda);
            let u = DVector::from_vec(u);
            let s = u.norm_squared();
            (u, s)
        })
        .collect()
}

fn residual_from(kind: ObjectiveKind, s: f64, index: usize, distances: &DistanceSet) -> f64 {
    if kind.is_range_form() {
        0.5 * (s.sqrt() - distances.as_slice()[index])
    } else {
        0.5 * (s - distances.squared()[index])
    }
}

pub fn residuals(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<DVector<f64>> {
    p.check(kind, scenario)?;
    let d = scenario.distances();
    Ok(DVector::from_iterator(
        d.len(),
        offsets(scenario, p)
            .iter()
            .enumerate()
            .map(|(i, (_, s))| residual_from(kind, *s, i, d)),
    ))
}

/// Residual vector and its Jacobian (N × n_params).
pub fn residuals_and_jacobian(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    p.check(kind, scenario)?;
    let d = scenario.distances();
    let offs = offsets(scenario, p);
    let n = p.len();
    let mut r = DVector::zeros(d.len());
    let mut jac = DMatrix::zeros(d.len(), n);
    for (i, (u, s)) in offs.iter().enumerate() {
        r[i] = residual_from(kind, *s, i, d);
        let scale = if kind.is_range_form() {
            if *s == 0.0 {
                return Err(Error::NonDifferentiable { kind, station: i });
            }
            0.5 / s.sqrt()
        } else {
            1.0
        };
        for k in 0..n {
            jac[(i, k)] = scale * u[k];
        }
    }
    Ok((r, jac))
}

pub fn evaluate(kind: ObjectiveKind, scenario: &Scenario, p: &ParameterVector) -> Result<f64> {
    Ok(residuals(kind, scenario, p)?.norm_squared())
}

pub fn gradient(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<DVector<f64>> {
    let (r, jac) = residuals_and_jacobian(kind, scenario, p)?;
    Ok(2.0 * jac.tr_mul(&r))
}

pub fn hessian(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<DMatrix<f64>> {
    Ok(eval_report(kind, scenario, p)?.hessian)
}

/// `H = 2 (JᵀJ + Σ r_i ∇²r_i)`.
pub fn eval_report(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<EvalReport> {
    let (r, jac) = residuals_and_jacobian(kind, scenario, p)?;
    let n = p.len();
    let mut second = DMatrix::<f64>::zeros(n, n);
    if kind.is_range_form() {
        // ∇²r_i = ½ (I − u uᵀ / s) / √s
        for ((u, s), ri) in offsets(scenario, p).iter().zip(r.iter()) {
            let root = s.sqrt();
            let mut h = DMatrix::identity(n, n) - (u * u.transpose()) / *s;
            h *= 0.5 / root;
            second += h * *ri;
        }
    } else {
        // ∇²r_i = I
        second.fill_diagonal(r.sum());
    }
    let mut hessian = 2.0 * (jac.tr_mul(&jac) + second);
    // Symmetrize away rounding from the outer products.
    hessian = 0.5 * (&hessian + hessian.transpose());
    Ok(EvalReport {
        value: r.norm_squared(),
        gradient: 2.0 * jac.tr_mul(&r),
        hessian,
    })
}

/// Second, third and fourth derivatives of `FL2` with respect to `λ`:
/// `(Σρ_i + 3Nλ², 6Nλ, 6N)` with `ρ_i = |p − a_i|² − d_i²`.
pub fn lambda_quartic_at(scenario: &Scenario, p: &ParameterVector) -> Result<(f64, f64, f64)> {
    p.check(ObjectiveKind::FL2, scenario)?;
    let lambda = p.lambda.expect("checked above");
    let n = scenario.n_stations() as f64;
    let rho: f64 = scenario
        .stations()
        .iter()
        .zip(scenario.distances().squared())
        .map(|(a, d2)| p.position.squared_distance_to(a) - d2)
        .sum();
    Ok((rho + 3.0 * n * lambda * lambda, 6.0 * n * lambda, 6.0 * n))
}
