//! Stationary-point classification and the checks that tie benchmark
//! outcomes back to the saddle-point argument for the lifted objective.
//!
//! The lifted `FL2` Hessian at `(L, λ = 0)` is block diagonal: the position
//! block equals the `F2` Hessian at `L`, the mixed entries vanish, and the
//! `λλ` entry is `Σφ_i = 2 x_G Σa_i − N x_G²` in the canonical frame. That
//! entry is negative whenever `2Σa_i < N x_G`, which follows from
//! stationarity of `F2` at `L` together with `F2(L) > 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constellation, Position, Scenario};
use crate::objectives::{eval_report, gradient, ObjectiveKind, ParameterVector};
use crate::optimizer::{solve, SolverSettings};

/// Distance from the ground truth beyond which a minimum counts as spurious.
pub const LOCAL_MIN_ERROR: f64 = 0.5;
pub const DEFAULT_CURV_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
    NotStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub kind: ObjectiveKind,
    pub point: ParameterVector,
    pub value: f64,
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub classification: Classification,
}

impl StationaryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Default gradient tolerance, scaled by the objective value.
pub fn default_grad_tol(value: f64) -> f64 {
    1e-6 * (1.0 + value)
}

fn classify_eigenvalues(eigenvalues: &[f64], curv_tol: f64) -> Classification {
    let has_neg = eigenvalues.iter().any(|&e| e < -curv_tol);
    let has_pos = eigenvalues.iter().any(|&e| e > curv_tol);
    let has_flat = eigenvalues.iter().any(|&e| e.abs() <= curv_tol);
    match (has_neg, has_pos, has_flat) {
        (true, true, _) => Classification::Saddle,
        (_, _, true) => Classification::Degenerate,
        (false, true, false) => Classification::Minimum,
        (true, false, false) => Classification::Maximum,
        (false, false, false) => Classification::Degenerate,
    }
}

fn ascending_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn classify(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
    grad_tol: f64,
    curv_tol: f64,
) -> Result<StationaryReport> {
    let report = eval_report(kind, scenario, p)?;
    let gradient_norm = report.gradient.norm();
    let hessian_eigenvalues = ascending_eigenvalues(&report.hessian);
    let classification = if gradient_norm > grad_tol {
        Classification::NotStationary
    } else {
        classify_eigenvalues(&hessian_eigenvalues, curv_tol)
    };
    Ok(StationaryReport {
        kind,
        point: p.clone(),
        value: report.value,
        gradient_norm,
        hessian_eigenvalues,
        classification,
    })
}

/// [`classify`] with the value-scaled gradient tolerance and `curv_tol = 1e-8`.
pub fn classify_default(
    kind: ObjectiveKind,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<StationaryReport> {
    let value = crate::objectives::evaluate(kind, scenario, p)?;
    classify(kind, scenario, p, default_grad_tol(value), DEFAULT_CURV_TOL)
}

/// Newton iterations on an unlifted objective to sharpen an approximate
/// minimum. Stops early if the Hessian loses positive definiteness.
pub fn polish_minimum(
    kind: ObjectiveKind,
    scenario: &Scenario,
    start: &Position,
) -> Result<Position> {
    let kind = kind.unlifted();
    let mut x = start.to_vector();
    for _ in 0..50 {
        let p = ParameterVector::unlifted(Position::from_vector(&x)?);
        let report = eval_report(kind, scenario, &p)?;
        let Some(chol) = report.hessian.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&report.gradient);
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        x -= &step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    Position::from_vector(&x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinimum {
    pub position: Position,
    pub value: f64,
    pub error: f64,
    pub report: StationaryReport,
}

/// Multi-start search for spurious local minima of the unlifted objective.
///
/// Starts are uniform in `[0, cube_side]^dim`. Endpoints farther than
/// [`LOCAL_MIN_ERROR`] from the ground truth are polished with Newton steps
/// and kept only if they classify as `Minimum`. Duplicates within `1e-6`
/// are merged.
pub fn find_local_minima<R: Rng + ?Sized>(
    kind: ObjectiveKind,
    scenario: &Scenario,
    n_starts: usize,
    cube_side: f64,
    settings: &SolverSettings,
    rng: &mut R,
) -> Result<Vec<LocalMinimum>> {
    let kind = kind.unlifted();
    let mut found: Vec<LocalMinimum> = Vec::new();
    for _ in 0..n_starts {
        let coords = (0..scenario.dim())
            .map(|_| rng.random_range(0.0..cube_side))
            .collect();
        let x0 = ParameterVector::unlifted(Position::new(coords)?);
        let Ok(res) = solve(kind, scenario, &x0, settings) else {
            continue;
        };
        let end = &res.final_point.position;
        if end.squared_distance_to(scenario.ground_truth()).sqrt() <= LOCAL_MIN_ERROR {
            continue;
        }
        let Some(minimum) = verify_local_minimum(kind, scenario, end)? else {
            continue;
        };
        if found
            .iter()
            .all(|m| m.position.squared_distance_to(&minimum.position) > 1e-12)
        {
            found.push(minimum);
        }
    }
    Ok(found)
}

/// Polishes `approx` and returns it if it is a strict local minimum away
/// from the ground truth.
pub fn verify_local_minimum(
    kind: ObjectiveKind,
    scenario: &Scenario,
    approx: &Position,
) -> Result<Option<LocalMinimum>> {
    let kind = kind.unlifted();
    let Ok(position) = polish_minimum(kind, scenario, approx) else {
        return Ok(None);
    };
    let p = ParameterVector::unlifted(position.clone());
    let Ok(report) = classify_default(kind, scenario, &p) else {
        return Ok(None);
    };
    let error = position.squared_distance_to(scenario.ground_truth()).sqrt();
    if report.classification != Classification::Minimum || error <= LOCAL_MIN_ERROR {
        return Ok(None);
    }
    Ok(Some(LocalMinimum {
        position,
        value: report.value,
        error,
        report,
    }))
}

/// A scenario expressed in the frame with the local minimum at the origin
/// and the ground truth on the positive first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFrame {
    pub scenario: Scenario,
    pub x_g: f64,
    pub rotation: DMatrix<f64>,
    pub origin: DVector<f64>,
}

/// Proper rotation `R` with `R u = e1` for a unit vector `u`.
fn rotation_to_first_axis(u: &DVector<f64>) -> DMatrix<f64> {
    let dim = u.len();
    let mut e1 = DVector::zeros(dim);
    e1[0] = 1.0;
    let v = u - &e1;
    let vv = v.norm_squared();
    if vv <= 1e-30 {
        return DMatrix::identity(dim, dim);
    }
    // Householder reflection maps u to e1; flipping the second axis restores det = +1.
    let householder = DMatrix::identity(dim, dim) - (&v * v.transpose()) * (2.0 / vv);
    let mut flip = DMatrix::identity(dim, dim);
    flip[(1, 1)] = -1.0;
    flip * householder
}

pub fn canonical_frame(scenario: &Scenario, local_min: &Position) -> Result<CanonicalFrame> {
    if local_min.dim() != scenario.dim() {
        return Err(Error::DimensionMismatch {
            expected: scenario.dim(),
            found: local_min.dim(),
        });
    }
    let origin = local_min.to_vector();
    let offset = scenario.ground_truth().to_vector() - &origin;
    let x_g = offset.norm();
    if x_g == 0.0 {
        return Err(Error::CoincidentPoints("local minimum equals ground truth"));
    }
    let rotation = rotation_to_first_axis(&(offset / x_g));
    let transformed = scenario.transformed(&rotation, &origin)?;
    Ok(CanonicalFrame {
        scenario: transformed,
        x_g,
        rotation,
        origin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleInequalities {
    pub n: usize,
    pub x_g: f64,
    pub sum_a: f64,
    pub sum_a_sq: f64,
    /// `2 Σa_i < N x_G`
    pub holds_19: bool,
    /// `4 Σa_i² < N x_G²`
    pub holds_27: bool,
}

/// Evaluates both inequalities on a scenario already in canonical form.
pub fn saddle_inequalities(canonical: &Scenario) -> Result<SaddleInequalities> {
    let g = canonical.ground_truth().coords();
    let x_g = g[0];
    let off_axis = g[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if x_g.is_nan() || x_g <= 0.0 {
        return Err(Error::NotCanonical(format!(
            "ground truth x = {x_g} must be positive"
        )));
    }
    if off_axis > 1e-9 * (1.0 + x_g) {
        return Err(Error::NotCanonical(format!(
            "ground truth is {off_axis:e} off the first axis"
        )));
    }
    let n = canonical.n_stations();
    let sum_a: f64 = canonical.stations().iter().map(|s| s.coords()[0]).sum();
    let sum_a_sq: f64 = canonical
        .stations()
        .iter()
        .map(|s| s.coords()[0].powi(2))
        .sum();
    Ok(SaddleInequalities {
        n,
        x_g,
        sum_a,
        sum_a_sq,
        holds_19: 2.0 * sum_a < n as f64 * x_g,
        holds_27: 4.0 * sum_a_sq < n as f64 * x_g * x_g,
    })
}

/// `M = Σ (a_i − a*)(a_i − a*)ᵀ` with `a*` the station centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadMatrix {
    pub m: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl SpreadMatrix {
    pub fn is_positive_definite(&self) -> bool {
        let max = self.eigenvalues.last().copied().unwrap_or(0.0);
        self.eigenvalues[0] > 1e-12 * max.max(f64::MIN_POSITIVE)
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }
}

pub fn spread_matrix(constellation: &Constellation) -> SpreadMatrix {
    let centroid = constellation.centroid();
    let dim = constellation.dim();
    let mut m = DMatrix::zeros(dim, dim);
    for s in constellation.stations() {
        let dev = s.to_vector() - &centroid;
        m += &dev * dev.transpose();
    }
    let eigenvalues = ascending_eigenvalues(&m);
    SpreadMatrix { m, eigenvalues }
}

/// `Σ(|p − a_i|² + λ² − d_i²)`, the factor whose vanishing makes
/// `∂F_L2/∂λ = 0` at `λ ≠ 0`, along with a magnitude scale for tolerances.
pub fn lambda_constraint_residual(scenario: &Scenario, p: &ParameterVector) -> (f64, f64) {
    let l2 = p.lambda.unwrap_or(0.0).powi(2);
    scenario
        .stations()
        .iter()
        .zip(scenario.distances().squared())
        .fold((0.0, 0.0), |(sum, scale), (a, d2)| {
            let r2 = p.position.squared_distance_to(a);
            (sum + r2 + l2 - d2, scale + r2 + l2 + d2)
        })
}

/// The `λ > 0` that puts `position` on the constraint surface, if one exists.
pub fn lambda_on_constraint(scenario: &Scenario, position: &Position) -> Option<f64> {
    let (rho_sum, _) =
        lambda_constraint_residual(scenario, &ParameterVector::unlifted(position.clone()));
    let l2 = -rho_sum / scenario.n_stations() as f64;
    (l2 > 0.0).then(|| l2.sqrt())
}

/// Max-norm gap between the analytic `FL2` position gradient and
/// `2 M (p − x_G)` on the `∂F_L2/∂λ = 0` surface.
pub fn lifted_gradient_identity_check(scenario: &Scenario, p: &ParameterVector) -> Result<f64> {
    if p.lambda.is_none() {
        return Err(Error::LambdaMismatch {
            kind: ObjectiveKind::FL2,
        });
    }
    let (residual, scale) = lambda_constraint_residual(scenario, p);
    if residual.abs() > 1e-9 * scale.max(1.0) {
        return Err(Error::ConstraintNotSatisfied { residual });
    }
    let grad = gradient(ObjectiveKind::FL2, scenario, p)?;
    let dim = scenario.dim();
    let spread = spread_matrix(scenario.constellation());
    let delta = p.position.to_vector() - scenario.ground_truth().to_vector();
    let predicted = 2.0 * &spread.m * delta;
    Ok((grad.rows(0, dim) - predicted).amax())
}
