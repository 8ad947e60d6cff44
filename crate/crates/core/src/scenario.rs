//! Benchmark scenario generation.
//!
//! Random scenarios draw stations and target uniformly in an axis-aligned
//! cube and reject near-collinear constellations. Planted examples place a
//! guaranteed `F2` local minimum at the origin by mixing two station
//! families: family A at the origin and family B on the line `x = x_G / 2`.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), whose output is fixed
//! by its published algorithm, so campaigns replicate across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{passes_collinearity_gate, Constellation, Position, Scenario};
use crate::objectives::{ObjectiveKind, ParameterVector};

const MAX_REJECTIONS: usize = 10_000;
const MIN_TARGET_CLEARANCE: f64 = 1e-6;

/// Starting value of `λ` for lifted objectives.
pub const INITIAL_LAMBDA: f64 = 1.0;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for one trial of a campaign; trials can be generated
/// in any order and still reproduce.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub dim: usize,
    pub n_stations: usize,
    #[serde(default = "default_cube_side")]
    pub cube_side: f64,
    #[serde(default = "default_min_sv")]
    pub min_normalized_sv: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cube_side() -> f64 {
    10.0
}

fn default_min_sv() -> f64 {
    0.1
}

impl GeneratorConfig {
    pub fn new(dim: usize, n_stations: usize, seed: u64) -> Self {
        Self {
            dim,
            n_stations,
            cube_side: default_cube_side(),
            min_normalized_sv: default_min_sv(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.n_stations < self.dim + 1 {
            return Err(Error::TooFewStations {
                needed: self.dim + 1,
                found: self.n_stations,
            });
        }
        if !(self.cube_side.is_finite() && self.cube_side > 0.0) {
            return Err(Error::InvalidConfig("cube_side must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_normalized_sv) {
            return Err(Error::InvalidConfig(
                "min_normalized_sv must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        let coords = (0..self.dim)
            .map(|_| rng.random_range(0.0..self.cube_side))
            .collect();
        Position::new(coords).expect("cube samples are finite")
    }
}

/// Draws a gate-passing scenario from the config's own seed.
pub fn random_scenario(config: &GeneratorConfig) -> Result<Scenario> {
    random_scenario_with(config, &mut seeded_rng(config.seed))
}

pub fn random_scenario_with<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    rng: &mut R,
) -> Result<Scenario> {
    config.validate()?;
    let mut constellation = None;
    for _ in 0..MAX_REJECTIONS {
        let stations: Vec<Position> = (0..config.n_stations)
            .map(|_| config.random_point(rng))
            .collect();
        let candidate = Constellation::new(stations)?;
        if passes_collinearity_gate(&candidate, config.min_normalized_sv) {
            constellation = Some(candidate);
            break;
        }
    }
    let constellation = constellation.ok_or(Error::GenerationFailed {
        attempts: MAX_REJECTIONS,
    })?;

    for _ in 0..MAX_REJECTIONS {
        let target = config.random_point(rng);
        let clear = constellation
            .stations()
            .iter()
            .all(|s| s.squared_distance_to(&target) > MIN_TARGET_CLEARANCE * MIN_TARGET_CLEARANCE);
        if clear {
            return Scenario::new(constellation, target);
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_REJECTIONS,
    })
}

/// Uniform start position in the cube; lifted kinds start at `λ = 1`.
pub fn random_initial<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    kind: ObjectiveKind,
    rng: &mut R,
) -> ParameterVector {
    ParameterVector::for_kind(kind, config.random_point(rng), INITIAL_LAMBDA)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedExampleConfig {
    pub x_g: f64,
    pub s1: usize,
    pub s2: usize,
    pub b_values: Vec<f64>,
}

impl PlantedExampleConfig {
    /// The four-station worked example with `x_G = 1`.
    pub fn worked_example() -> Self {
        Self {
            x_g: 1.0,
            s1: 1,
            s2: 3,
            b_values: vec![-2.0, 1.0, 3.0],
        }
    }

    /// Checks the three local-minimum conditions on the planted layout.
    pub fn check_conditions(&self) -> Result<()> {
        if !(self.x_g.is_finite() && self.x_g > 0.0) {
            return Err(Error::InvalidConfig("x_g must be positive".into()));
        }
        if self.b_values.len() != self.s2 {
            return Err(Error::InvalidConfig(format!(
                "expected {} b_values, got {}",
                self.s2,
                self.b_values.len()
            )));
        }
        if self.b_values.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("b_values"));
        }
        // Rows 1 and 2 coincide for this layout; row 2 is the direct count check.
        if 0.5 * self.s2 as f64 <= self.s1 as f64 {
            return Err(Error::PlantedCondition {
                row: 2,
                detail: format!(
                    "0.5·S2 = {} must exceed S1 = {}",
                    0.5 * self.s2 as f64,
                    self.s1
                ),
            });
        }
        let n = (self.s1 + self.s2) as f64;
        let sum_a = self.s2 as f64 * 0.5 * self.x_g;
        if 3.0 * sum_a <= n * self.x_g {
            return Err(Error::PlantedCondition {
                row: 1,
                detail: format!(
                    "3·Σa_i = {} must exceed N·x_G = {}",
                    3.0 * sum_a,
                    n * self.x_g
                ),
            });
        }
        let sum_b_sq: f64 = self.b_values.iter().map(|b| b * b).sum();
        let rhs = self.x_g * self.x_g * self.s1 as f64;
        if 2.0 * sum_b_sq <= rhs {
            return Err(Error::PlantedCondition {
                row: 3,
                detail: format!("2·Σb_i² = {} must exceed x_G²·S1 = {rhs}", 2.0 * sum_b_sq),
            });
        }
        // The per-axis conditions ignore the xy cross term; the full position
        // Hessian `[[xx, xy], [xy, yy]]` at the origin must be positive definite.
        let xg2 = self.x_g * self.x_g;
        let xx = (0.5 * self.s2 as f64 - self.s1 as f64) * xg2;
        let yy = 2.0 * sum_b_sq - self.s1 as f64 * xg2;
        let xy = self.x_g * self.b_values.iter().sum::<f64>();
        if xx * yy - xy * xy <= 0.0 {
            return Err(Error::PlantedCondition {
                row: 4,
                detail: format!(
                    "position Hessian at the origin is not positive definite (det = {})",
                    xx * yy - xy * xy
                ),
            });
        }
        Ok(())
    }
}

/// 2-D scenario with a planted `F2` local minimum at the origin and ground
/// truth at `(x_g, 0)`.
pub fn planted_example(config: &PlantedExampleConfig) -> Result<Scenario> {
    config.check_conditions()?;
    let mut stations = vec![Position::new(vec![0.0, 0.0])?; config.s1];
    for &b in &config.b_values {
        stations.push(Position::new(vec![0.5 * config.x_g, b])?);
    }
    Scenario::new(
        Constellation::new(stations)?,
        Position::new(vec![config.x_g, 0.0])?,
    )
}

/// Random planted configuration; retries until all conditions hold.
pub fn random_planted_config<R: Rng + ?Sized>(rng: &mut R) -> PlantedExampleConfig {
    loop {
        // S1 = 0 would mirror the ground truth onto the origin (a second global minimum).
        let s1 = rng.random_range(1..=2usize);
        let s2 = rng.random_range((2 * s1 + 1).max(2)..=2 * s1 + 4);
        let cfg = PlantedExampleConfig {
            x_g: rng.random_range(0.2..5.0),
            s1,
            s2,
            b_values: (0..s2).map(|_| rng.random_range(-5.0..5.0)).collect(),
        };
        if cfg.check_conditions().is_ok() {
            return cfg;
        }
    }
}
