//! Spatial types for ranging problems: station positions, targets, exact
//! distance sets and the covariance-based collinearity screen.
//!
//! Everything here is an immutable value. A [`Scenario`] always carries
//! distances recomputed from its ground truth, so an inconsistent instance
//! cannot be constructed or deserialized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 2-D or 3-D model space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Position(Vec<f64>);

impl Position {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::UnsupportedDimension(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("position"));
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// Builds a position from a vector, validating finiteness and dimension.
    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn squared_distance_to(&self, other: &Position) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Position {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<Position> for Vec<f64> {
    fn from(p: Position) -> Self {
        p.0
    }
}

/// Ordered base-station positions, all of the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Position>", into = "Vec<Position>")]
pub struct Constellation {
    stations: Vec<Position>,
}

impl Constellation {
    pub fn new(stations: Vec<Position>) -> Result<Self> {
        let first = stations.first().ok_or(Error::TooFewStations {
            needed: 1,
            found: 0,
        })?;
        let dim = first.dim();
        for s in &stations {
            s.check_dim(dim)?;
        }
        Ok(Self { stations })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let stations = rows
            .iter()
            .map(|r| Position::new(r.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(stations)
    }

    pub fn stations(&self) -> &[Position] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.stations[0].dim()
    }

    /// At least `dim + 1` stations are needed for an unambiguous fix.
    pub fn is_well_posed(&self) -> bool {
        self.len() > self.dim()
    }

    pub fn centroid(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim());
        for s in &self.stations {
            c += s.to_vector();
        }
        c / self.len() as f64
    }
}

impl TryFrom<Vec<Position>> for Constellation {
    type Error = Error;

    fn try_from(stations: Vec<Position>) -> Result<Self> {
        Self::new(stations)
    }
}

impl From<Constellation> for Vec<Position> {
    fn from(c: Constellation) -> Self {
        c.stations
    }
}

/// Exact ranges from the target to every station, in station order.
///
/// Squared ranges are kept alongside, computed directly from coordinates, so
/// squared-range residuals vanish exactly at the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSet {
    ranges: Vec<f64>,
    squared: Vec<f64>,
}

impl DistanceSet {
    pub fn as_slice(&self) -> &[f64] {
        &self.ranges
    }

    pub fn squared(&self) -> &[f64] {
        &self.squared
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Euclidean distance from `target` to each station.
pub fn compute_distances(constellation: &Constellation, target: &Position) -> Result<DistanceSet> {
    target.check_dim(constellation.dim())?;
    let squared: Vec<f64> = constellation
        .stations()
        .iter()
        .map(|s| target.squared_distance_to(s))
        .collect();
    Ok(DistanceSet {
        ranges: squared.iter().map(|d2| d2.sqrt()).collect(),
        squared,
    })
}

/// Biased covariance (divide by N) of the station coordinates.
pub fn station_covariance(constellation: &Constellation) -> DMatrix<f64> {
    let dim = constellation.dim();
    let mean = constellation.centroid();
    let mut cov = DMatrix::zeros(dim, dim);
    for s in constellation.stations() {
        let dev = s.to_vector() - &mean;
        cov += &dev * dev.transpose();
    }
    cov / constellation.len() as f64
}

/// Singular values of the station covariance, descending, each divided by
/// the largest. A zero covariance yields all zeros.
pub fn collinearity_singular_values(constellation: &Constellation) -> Result<Vec<f64>> {
    if constellation.len() < 2 {
        return Err(Error::TooFewStations {
            needed: 2,
            found: constellation.len(),
        });
    }
    let cov = station_covariance(constellation);
    let mut sv: Vec<f64> = cov.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let max = sv[0];
    if max <= 0.0 {
        return Ok(vec![0.0; sv.len()]);
    }
    Ok(sv.iter().map(|v| v / max).collect())
}

/// True when every normalized singular value exceeds `threshold`.
pub fn passes_collinearity_gate(constellation: &Constellation, threshold: f64) -> bool {
    collinearity_singular_values(constellation)
        .map(|sv| sv.iter().all(|&v| v > threshold))
        .unwrap_or(false)
}

/// An errorless ranging problem: stations, true target and exact distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    constellation: Constellation,
    ground_truth: Position,
    distances: DistanceSet,
}

impl Scenario {
    pub fn new(constellation: Constellation, ground_truth: Position) -> Result<Self> {
        let distances = compute_distances(&constellation, &ground_truth)?;
        Ok(Self {
            constellation,
            ground_truth,
            distances,
        })
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn stations(&self) -> &[Position] {
        self.constellation.stations()
    }

    pub fn ground_truth(&self) -> &Position {
        &self.ground_truth
    }

    pub fn distances(&self) -> &DistanceSet {
        &self.distances
    }

    pub fn dim(&self) -> usize {
        self.constellation.dim()
    }

    pub fn n_stations(&self) -> usize {
        self.constellation.len()
    }

    /// Applies `x -> rotation * (x - origin)` to stations and ground truth.
    pub fn transformed(&self, rotation: &DMatrix<f64>, origin: &DVector<f64>) -> Result<Self> {
        let map = |p: &Position| Position::from_vector(&(rotation * (p.to_vector() - origin)));
        let stations = self
            .stations()
            .iter()
            .map(map)
            .collect::<Result<Vec<_>>>()?;
        Self::new(Constellation::new(stations)?, map(&self.ground_truth)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// On-disk form of a [`Scenario`]; distances are never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub stations: Vec<Position>,
    pub ground_truth: Position,
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        Scenario::new(Constellation::new(f.stations)?, f.ground_truth)
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        ScenarioFile {
            stations: s.constellation.stations,
            ground_truth: s.ground_truth,
        }
    }
}
