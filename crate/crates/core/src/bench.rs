//! Monte-Carlo campaigns, basin sweeps and the worked 2-D example.
//!
//! A campaign draws one scenario and one start position per trial and
//! solves every requested objective from that same start (lifted kinds
//! append `λ = 1`). Trials run in parallel, but each trial owns an
//! independent ChaCha8 stream keyed by its id, and results are emitted in
//! id order, so the CSV output depends only on the seed.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Position, Scenario};
use crate::objectives::{ObjectiveKind, ParameterVector};
use crate::optimizer::{solve, OptimizationResult, SolverSettings, Termination};
use crate::scenario::{
    planted_example, random_initial, random_scenario_with, trial_rng, GeneratorConfig,
    PlantedExampleConfig, INITIAL_LAMBDA,
};
use crate::stationarity::{
    classify_default, verify_local_minimum, Classification, LOCAL_MIN_ERROR,
};

/// Desk-scale default trial count.
pub const DEFAULT_TRIALS: usize = 1000;

/// Floats in CSV output carry 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn parse_float(s: &str) -> Result<f64> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad float `{s}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario_id: usize,
    pub kind: ObjectiveKind,
    /// Euclidean distance from the final position to the ground truth;
    /// infinite if the solver reported an error.
    pub error: f64,
    pub is_local_min_failure: bool,
    pub iterations: usize,
    /// `None` when the solver returned an error.
    pub termination: Option<Termination>,
    #[serde(skip)]
    pub final_point: Option<ParameterVector>,
}

pub fn run_trial(
    scenario_id: usize,
    scenario: &Scenario,
    kind: ObjectiveKind,
    x0: &ParameterVector,
    settings: &SolverSettings,
) -> TrialResult {
    match solve(kind, scenario, x0, settings) {
        Ok(res) => {
            let error = res
                .final_point
                .position
                .squared_distance_to(scenario.ground_truth())
                .sqrt();
            TrialResult {
                scenario_id,
                kind,
                error,
                is_local_min_failure: error > LOCAL_MIN_ERROR,
                iterations: res.iterations,
                termination: Some(res.termination),
                final_point: Some(res.final_point),
            }
        }
        Err(_) => TrialResult {
            scenario_id,
            kind,
            error: f64::INFINITY,
            is_local_min_failure: true,
            iterations: 0,
            termination: None,
            final_point: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n_stations: usize,
    pub kind: ObjectiveKind,
    pub mean_error: f64,
    /// Population standard deviation.
    pub std_error: f64,
    pub failure_count: usize,
    pub trial_count: usize,
}

impl BenchmarkRow {
    /// Aggregates the trials of one kind. Trials of other kinds are ignored.
    pub fn from_trials(n_stations: usize, kind: ObjectiveKind, trials: &[TrialResult]) -> Self {
        let errors: Vec<f64> = trials
            .iter()
            .filter(|t| t.kind == kind)
            .map(|t| t.error)
            .collect();
        let count = errors.len();
        let (mean, std) = if count == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = errors.iter().sum::<f64>() / count as f64;
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / count as f64;
            (mean, var.sqrt())
        };
        Self {
            n_stations,
            kind,
            mean_error: mean,
            std_error: std,
            failure_count: trials
                .iter()
                .filter(|t| t.kind == kind && t.is_local_min_failure)
                .count(),
            trial_count: count,
        }
    }

    pub fn failure_rate(&self) -> f64 {
        self.failure_count as f64 / self.trial_count as f64
    }
}

/// The scenario and start position of one campaign trial.
pub fn campaign_trial_setup(
    config: &GeneratorConfig,
    scenario_id: usize,
) -> Result<(Scenario, Position)> {
    let mut rng = trial_rng(config.seed, scenario_id as u64);
    let scenario = random_scenario_with(config, &mut rng)?;
    let start = random_initial(config, ObjectiveKind::F2, &mut rng).position;
    Ok((scenario, start))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub config: GeneratorConfig,
    pub kinds: Vec<ObjectiveKind>,
    pub trials: Vec<TrialResult>,
    pub rows: Vec<BenchmarkRow>,
}

pub fn run_campaign(
    config: &GeneratorConfig,
    kinds: &[ObjectiveKind],
    n_trials: usize,
    settings: &SolverSettings,
) -> Result<Campaign> {
    config.validate()?;
    settings.validate()?;
    if n_trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no objective kinds requested".into()));
    }
    let per_trial: Vec<Vec<TrialResult>> = (0..n_trials)
        .into_par_iter()
        .map(|id| {
            let (scenario, start) = campaign_trial_setup(config, id)?;
            Ok(kinds
                .iter()
                .map(|&kind| {
                    let x0 = ParameterVector::for_kind(kind, start.clone(), INITIAL_LAMBDA);
                    run_trial(id, &scenario, kind, &x0, settings)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let trials: Vec<TrialResult> = per_trial.into_iter().flatten().collect();
    let rows = kinds
        .iter()
        .map(|&kind| BenchmarkRow::from_trials(config.n_stations, kind, &trials))
        .collect();
    Ok(Campaign {
        config: config.clone(),
        kinds: kinds.to_vec(),
        trials,
        rows,
    })
}

const TRIALS_HEADER: &str = "scenario_id,kind,error,failure,iterations,termination";
const ROWS_HEADER: &str = "n,kind,mean,std,failures,trials";
const CSV_NOTE: &str = "# std is the population standard deviation; every kind in a trial starts from the same position (lifted kinds with lambda = 1)";

pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = format!("{CSV_NOTE}\n{TRIALS_HEADER}\n");
    for t in trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            t.scenario_id,
            t.kind,
            fmt_float(t.error),
            u8::from(t.is_local_min_failure),
            t.iterations,
            t.termination.map_or("Error", Termination::as_str),
        );
    }
    out
}

pub fn rows_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = format!("{CSV_NOTE}\n{ROWS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_stations,
            r.kind,
            fmt_float(r.mean_error),
            fmt_float(r.std_error),
            r.failure_count,
            r.trial_count,
        );
    }
    out
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
}

fn parse_termination(s: &str) -> Result<Option<Termination>> {
    Ok(Some(match s {
        "FTol" => Termination::FTol,
        "XTol" => Termination::XTol,
        "Optimality" => Termination::Optimality,
        "MaxIter" => Termination::MaxIter,
        "MaxFeval" => Termination::MaxFeval,
        "Error" => return Ok(None),
        other => return Err(Error::InvalidConfig(format!("bad termination `{other}`"))),
    }))
}

/// Reads back the output of [`trials_csv`].
pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialResult>> {
    data_lines(text)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::InvalidConfig(format!("bad trials row `{line}`")));
            }
            let bad = |what: &str| Error::InvalidConfig(format!("bad {what} in `{line}`"));
            Ok(TrialResult {
                scenario_id: f[0].parse().map_err(|_| bad("scenario_id"))?,
                kind: f[1].parse()?,
                error: parse_float(f[2])?,
                is_local_min_failure: f[3] == "1",
                iterations: f[4].parse().map_err(|_| bad("iterations"))?,
                termination: parse_termination(f[5])?,
                final_point: None,
            })
        })
        .collect()
}

/// Reads back the output of [`rows_csv`].
pub fn parse_rows_csv(text: &str) -> Result<Vec<BenchmarkRow>> {
    data_lines(text)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::InvalidConfig(format!("bad rows row `{line}`")));
            }
            let bad = |what: &str| Error::InvalidConfig(format!("bad {what} in `{line}`"));
            Ok(BenchmarkRow {
                n_stations: f[0].parse().map_err(|_| bad("n"))?,
                kind: f[1].parse()?,
                mean_error: parse_float(f[2])?,
                std_error: parse_float(f[3])?,
                failure_count: f[4].parse().map_err(|_| bad("failures"))?,
                trial_count: f[5].parse().map_err(|_| bad("trials"))?,
            })
        })
        .collect()
}

/// Outcome of re-examining unlifted failures of a campaign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SaddleLoopSummary {
    /// Unlifted failures whose endpoint polished to a strict local minimum.
    pub verified_minima: usize,
    pub lifted_saddles: usize,
    /// `(scenario_id, kind, classification)` where the lift did not give a saddle.
    pub counterexamples: Vec<(usize, ObjectiveKind, Classification)>,
}

/// For every failed unlifted trial that ended at a verified local minimum,
/// classifies the lifted objective at `(L, λ = 0)`.
pub fn saddle_loop_check(
    config: &GeneratorConfig,
    trials: &[TrialResult],
) -> Result<SaddleLoopSummary> {
    let mut summary = SaddleLoopSummary::default();
    for t in trials
        .iter()
        .filter(|t| !t.kind.is_lifted() && t.is_local_min_failure)
    {
        let Some(end) = &t.final_point else {
            continue;
        };
        let (scenario, _) = campaign_trial_setup(config, t.scenario_id)?;
        let Some(minimum) = verify_local_minimum(t.kind, &scenario, &end.position)? else {
            continue;
        };
        summary.verified_minima += 1;
        let lifted = ParameterVector::lifted(minimum.position, 0.0);
        let class = classify_default(t.kind.lifted(), &scenario, &lifted)
            .map(|r| r.classification)
            .unwrap_or(Classification::Degenerate);
        if class == Classification::Saddle {
            summary.lifted_saddles += 1;
        } else {
            summary
                .counterexamples
                .push((t.scenario_id, t.kind.lifted(), class));
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl BasinGrid {
    pub fn square(half_width: f64, step: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
            step,
        }
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        if !(self.step > 0.0 && self.x_max >= self.x_min && self.y_max >= self.y_min) {
            return Err(Error::InvalidConfig("empty basin grid".into()));
        }
        let xs = Self::axis(self.x_min, self.x_max, self.step);
        let ys = Self::axis(self.y_min, self.y_max, self.step);
        Ok(ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasinLabel {
    GlobalMin,
    LocalMin,
    Diverged,
}

impl BasinLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GlobalMin => "GlobalMin",
            Self::LocalMin => "LocalMin",
            Self::Diverged => "Diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub x: f64,
    pub y: f64,
    pub label: BasinLabel,
    pub termination: Option<Termination>,
}

/// One solve per grid node, labelled by the nearest known stationary point
/// within [`LOCAL_MIN_ERROR`] of the endpoint.
pub fn basin_sweep(
    scenario: &Scenario,
    kind: ObjectiveKind,
    grid: &BasinGrid,
    known_local_minima: &[Position],
    settings: &SolverSettings,
) -> Result<Vec<BasinCell>> {
    if scenario.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: scenario.dim(),
        });
    }
    let nodes = grid.nodes()?;
    Ok(nodes
        .par_iter()
        .map(|&(x, y)| {
            let start = Position::new(vec![x, y]).expect("grid nodes are finite");
            let x0 = ParameterVector::for_kind(kind, start, INITIAL_LAMBDA);
            let (label, termination) = match solve(kind, scenario, &x0, settings) {
                Ok(res) => (
                    label_endpoint(scenario, &res, known_local_minima),
                    Some(res.termination),
                ),
                Err(_) => (BasinLabel::Diverged, None),
            };
            BasinCell {
                x,
                y,
                label,
                termination,
            }
        })
        .collect())
}

fn label_endpoint(
    scenario: &Scenario,
    res: &OptimizationResult,
    local_minima: &[Position],
) -> BasinLabel {
    let end = &res.final_point.position;
    let candidates = std::iter::once((scenario.ground_truth(), BasinLabel::GlobalMin))
        .chain(local_minima.iter().map(|p| (p, BasinLabel::LocalMin)));
    candidates
        .map(|(p, label)| (end.squared_distance_to(p).sqrt(), label))
        .filter(|(d, _)| *d <= LOCAL_MIN_ERROR)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(BasinLabel::Diverged, |(_, label)| label)
}

pub fn basin_csv(cells: &[BasinCell]) -> String {
    let mut out = String::from("x,y,label,termination\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(c.x),
            fmt_float(c.y),
            c.label.as_str(),
            c.termination.map_or("Error", Termination::as_str),
        );
    }
    out
}

/// Iterate trace as CSV: `step,x,y[,z],lambda,value`. The `lambda` field is
/// empty for unlifted kinds.
pub fn trace_csv(scenario: &Scenario, result: &OptimizationResult) -> Result<String> {
    let axes = ["x", "y", "z"];
    let mut out = format!("step,{},lambda,value\n", axes[..scenario.dim()].join(","));
    for (step, p) in result.trace.iter().flatten().enumerate() {
        let value = crate::objectives::evaluate(result.kind, scenario, p)?;
        let coords: Vec<String> = p.position.coords().iter().map(|c| fmt_float(*c)).collect();
        let _ = writeln!(
            out,
            "{step},{},{},{}",
            coords.join(","),
            p.lambda.map(fmt_float).unwrap_or_default(),
            fmt_float(value),
        );
    }
    Ok(out)
}

/// The planted 2-D example solved with `F2` and `FL2` from `(−1, 2)`,
/// `λ = 1`, with traces recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkedExample {
    pub scenario: Scenario,
    pub local_minimum: Position,
    pub unlifted: OptimizationResult,
    pub lifted: OptimizationResult,
}

pub fn worked_example(settings: &SolverSettings) -> Result<WorkedExample> {
    let scenario = planted_example(&PlantedExampleConfig::worked_example())?;
    let start = Position::new(vec![-1.0, 2.0])?;
    let settings = settings.clone().with_trace();
    let unlifted = solve(
        ObjectiveKind::F2,
        &scenario,
        &ParameterVector::unlifted(start.clone()),
        &settings,
    )?;
    let lifted = solve(
        ObjectiveKind::FL2,
        &scenario,
        &ParameterVector::lifted(start, INITIAL_LAMBDA),
        &settings,
    )?;
    Ok(WorkedExample {
        scenario,
        local_minimum: Position::origin(2)?,
        unlifted,
        lifted,
    })
}
