//! Levenberg-Marquardt on the residual vectors of [`crate::objectives`].
//!
//! Each step solves `(JᵀJ + μ·D) δ = −Jᵀr`, where `D` is the identity by
//! default (as in MATLAB's default `ScaleProblem = 'none'`) or `diag(JᵀJ)`
//! when [`DampingScaling::Marquardt`] is selected. The damping `μ` is divided by ten after an accepted step and multiplied by
//! ten after a rejected one. A step is accepted only if it strictly lowers
//! the objective, so the recorded trace is monotone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::objectives::{residuals, residuals_and_jacobian, ObjectiveKind, ParameterVector};

const DAMPING_FACTOR: f64 = 10.0;
const MAX_DAMPING: f64 = 1e32;

/// Solver limits and tolerances. Defaults follow the classical
/// MATLAB `levenberg-marquardt` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// `None` means `100 · n_vars`.
    pub max_function_evals: Option<usize>,
    /// Relative decrease of the objective between accepted iterates; it must
    /// hold on two consecutive accepted steps.
    pub f_tol: f64,
    /// Step norm relative to `x_tol + |x|`.
    pub x_tol: f64,
    /// Infinity norm of the gradient.
    pub optimality_tol: f64,
    pub initial_damping: f64,
    pub scaling: DampingScaling,
    pub record_trace: bool,
}

/// The matrix `D` added to `JᵀJ` in the damped step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DampingScaling {
    #[default]
    Identity,
    /// `diag(JᵀJ)`.
    Marquardt,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            max_function_evals: None,
            f_tol: 1e-6,
            x_tol: 1e-6,
            optimality_tol: 1e-4,
            initial_damping: 1e-2,
            scaling: DampingScaling::default(),
            record_trace: false,
        }
    }
}

impl SolverSettings {
    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn function_eval_limit(&self, n_vars: usize) -> usize {
        self.max_function_evals.unwrap_or(100 * n_vars)
    }

    pub fn validate(&self) -> Result<()> {
        let tols = [
            self.f_tol,
            self.x_tol,
            self.optimality_tol,
            self.initial_damping,
        ];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidConfig(
                "solver tolerances and initial damping must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.max_function_evals == Some(0) {
            return Err(Error::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    FTol,
    XTol,
    Optimality,
    MaxIter,
    MaxFeval,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FTol => "FTol",
            Self::XTol => "XTol",
            Self::Optimality => "Optimality",
            Self::MaxIter => "MaxIter",
            Self::MaxFeval => "MaxFeval",
        }
    }

    /// Stopped on a tolerance rather than a budget.
    pub fn is_converged(self) -> bool {
        matches!(self, Self::FTol | Self::XTol | Self::Optimality)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub kind: ObjectiveKind,
    pub final_point: ParameterVector,
    pub final_value: f64,
    pub iterations: usize,
    pub function_evals: usize,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<ParameterVector>>,
}

struct Iterate {
    x: DVector<f64>,
    r: DVector<f64>,
    jac: DMatrix<f64>,
    value: f64,
}

/// Damped normal-equation step, or `None` if the system is not positive
/// definite at this damping.
fn lm_step(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    damping: f64,
    scaling: DampingScaling,
) -> Option<DVector<f64>> {
    let jtj = jac.tr_mul(jac);
    let jtr = jac.tr_mul(r);
    let dmax = jtj.diagonal().max();
    let floor = if dmax > 0.0 { 1e-12 * dmax } else { 1.0 };
    let mut a = jtj.clone();
    for k in 0..a.nrows() {
        a[(k, k)] += damping
            * match scaling {
                DampingScaling::Identity => 1.0,
                DampingScaling::Marquardt => jtj[(k, k)].max(floor),
            };
    }
    let step = a.cholesky()?.solve(&(-jtr));
    step.iter().all(|v| v.is_finite()).then_some(step)
}

pub fn solve(
    kind: ObjectiveKind,
    scenario: &Scenario,
    x0: &ParameterVector,
    settings: &SolverSettings,
) -> Result<OptimizationResult> {
    settings.validate()?;
    if kind.is_lifted() && x0.lambda == Some(0.0) {
        return Err(Error::ZeroLambdaStart);
    }
    let to_point = |x: &DVector<f64>| ParameterVector::from_vector(kind, x);

    let (r, jac) = residuals_and_jacobian(kind, scenario, x0)?;
    let mut cur = Iterate {
        x: x0.to_vector(),
        value: r.norm_squared(),
        r,
        jac,
    };
    let n_vars = cur.x.len();
    let feval_limit = settings.function_eval_limit(n_vars);
    let mut evals = 1;
    let mut trace = settings.record_trace.then(|| vec![x0.clone()]);
    let mut damping = settings.initial_damping;
    let mut iterations = 0;
    let mut stalled = 0;

    let termination = loop {
        let grad = 2.0 * cur.jac.tr_mul(&cur.r);
        if grad.amax() <= settings.optimality_tol {
            break Termination::Optimality;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIter;
        }
        if evals >= feval_limit {
            break Termination::MaxFeval;
        }
        iterations += 1;

        let Some(step) = lm_step(&cur.jac, &cur.r, damping, settings.scaling) else {
            damping = (damping * DAMPING_FACTOR).min(MAX_DAMPING);
            continue;
        };
        let step_small = step.norm() <= settings.x_tol * (settings.x_tol + cur.x.norm());
        let x_new = &cur.x + &step;
        let Ok(p_new) = to_point(&x_new) else {
            damping = (damping * DAMPING_FACTOR).min(MAX_DAMPING);
            continue;
        };
        evals += 1;
        // A point where derivatives are undefined counts as a rejected step.
        let candidate = residuals_and_jacobian(kind, scenario, &p_new)
            .ok()
            .map(|(r, jac)| (r.norm_squared(), r, jac))
            .filter(|(value, _, _)| value.is_finite() && *value < cur.value);

        match candidate {
            Some((value, r, jac)) => {
                let decrease = cur.value - value;
                let prev_value = cur.value;
                cur = Iterate {
                    x: x_new,
                    r,
                    jac,
                    value,
                };
                if let Some(t) = trace.as_mut() {
                    t.push(p_new);
                }
                damping = (damping / DAMPING_FACTOR).max(f64::MIN_POSITIVE);
                if step_small {
                    break Termination::XTol;
                }
                if decrease <= settings.f_tol * prev_value {
                    stalled += 1;
                    if stalled >= 2 {
                        break Termination::FTol;
                    }
                } else {
                    stalled = 0;
                }
            }
            None => {
                if step_small {
                    break Termination::XTol;
                }
                damping = (damping * DAMPING_FACTOR).min(MAX_DAMPING);
            }
        }
    };

    let final_point = to_point(&cur.x)?;
    debug_assert_eq!(
        residuals(kind, scenario, &final_point).map(|r| r.norm_squared()),
        Ok(cur.value)
    );
    Ok(OptimizationResult {
        kind,
        final_point,
        final_value: cur.value,
        iterations,
        function_evals: evals,
        termination,
        trace,
    })
}
