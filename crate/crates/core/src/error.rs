use thiserror::Error;

use crate::objectives::ObjectiveKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}, only 2-D and 3-D are supported")]
    UnsupportedDimension(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need at least {needed} stations, found {found}")]
    TooFewStations { needed: usize, found: usize },

    #[error("parameter vector does not match objective {kind}: lifted kinds need lambda, unlifted kinds forbid it")]
    LambdaMismatch { kind: ObjectiveKind },

    #[error("objective {kind} is not differentiable at station {station} (zero range)")]
    NonDifferentiable { kind: ObjectiveKind, station: usize },

    #[error("lifted objective started with lambda = 0; the lift is inert there")]
    ZeroLambdaStart,

    #[error("points coincide: {0}")]
    CoincidentPoints(&'static str),

    #[error("scenario is not in the canonical frame: {0}")]
    NotCanonical(String),

    #[error("stationarity constraint for lambda is violated (residual {residual:e})")]
    ConstraintNotSatisfied { residual: f64 },

    #[error("scenario generation failed after {attempts} consecutive rejections")]
    GenerationFailed { attempts: usize },

    #[error("planted example condition {row} violated: {detail}")]
    PlantedCondition { row: u8, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
