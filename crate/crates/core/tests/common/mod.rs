//! Independent oracles shared by the integration tests. Nothing here calls
//! into the derivative or classification code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use toa_lift::geometry::{Constellation, Position, Scenario};
use toa_lift::objectives::{evaluate, ObjectiveKind, ParameterVector};

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Objective value straight from coordinates, `¼ Σ (·)²`.
pub fn naive_value(
    kind: ObjectiveKind,
    stations: &[Vec<f64>],
    truth: &[f64],
    p: &[f64],
    lambda: f64,
) -> f64 {
    stations
        .iter()
        .map(|a| {
            let r2 = dist2(p, a);
            let d2 = dist2(truth, a);
            let term = match kind {
                ObjectiveKind::F1 => r2.sqrt() - d2.sqrt(),
                ObjectiveKind::F2 => r2 - d2,
                ObjectiveKind::FL1 => (r2 + lambda * lambda).sqrt() - d2.sqrt(),
                ObjectiveKind::FL2 => r2 + lambda * lambda - d2,
            };
            0.25 * term * term
        })
        .sum()
}

pub fn scenario_from(stations: &[Vec<f64>], truth: &[f64]) -> Scenario {
    let rows: Vec<&[f64]> = stations.iter().map(Vec::as_slice).collect();
    Scenario::new(
        Constellation::from_rows(&rows).unwrap(),
        Position::new(truth.to_vec()).unwrap(),
    )
    .unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, dim: usize, side: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(0.0..side)).collect()
}

/// Stations, ground truth and an evaluation point in `[0, 10)^dim`. For the
/// range forms the point keeps at least 0.1 from every station.
pub fn random_setup<R: Rng>(
    rng: &mut R,
    kind: ObjectiveKind,
    dim: usize,
    n: usize,
) -> (Scenario, ParameterVector) {
    let stations: Vec<Vec<f64>> = (0..n).map(|_| random_point(rng, dim, 10.0)).collect();
    let truth = random_point(rng, dim, 10.0);
    let point = loop {
        let p = random_point(rng, dim, 10.0);
        if !kind.is_range_form() || stations.iter().all(|a| dist2(&p, a) > 0.01) {
            break p;
        }
    };
    let lambda = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let s = scenario_from(&stations, &truth);
    let p = ParameterVector::for_kind(kind, Position::new(point).unwrap(), lambda);
    (s, p)
}

fn perturbed(kind: ObjectiveKind, p: &ParameterVector, k: usize, delta: f64) -> ParameterVector {
    let mut v = p.to_vector();
    v[k] += delta;
    ParameterVector::from_vector(kind, &v).unwrap()
}

/// Central-difference gradient of the objective value with step
/// `1e-6 · (1 + |x|)`.
pub fn fd_gradient(kind: ObjectiveKind, s: &Scenario, p: &ParameterVector) -> DVector<f64> {
    let v = p.to_vector();
    let h = 1e-6 * (1.0 + v.norm());
    DVector::from_fn(v.len(), |k, _| {
        let up = evaluate(kind, s, &perturbed(kind, p, k, h)).unwrap();
        let down = evaluate(kind, s, &perturbed(kind, p, k, -h)).unwrap();
        (up - down) / (2.0 * h)
    })
}

/// Central differences of a gradient oracle, symmetrized.
pub fn fd_hessian<G>(kind: ObjectiveKind, p: &ParameterVector, grad: G) -> DMatrix<f64>
where
    G: Fn(&ParameterVector) -> DVector<f64>,
{
    let v = p.to_vector();
    let n = v.len();
    let h = 1e-5 * (1.0 + v.norm());
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = (grad(&perturbed(kind, p, k, h)) - grad(&perturbed(kind, p, k, -h))) / (2.0 * h);
        m.set_column(k, &col);
    }
    0.5 * (&m + m.transpose())
}

/// `|a − b| / max(|b|, 1)` in the max norm.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    diff / scale
}

/// Eigenvalues of the covariance of the station coordinates divided by the
/// largest, descending, via a symmetric eigendecomposition.
pub fn covariance_ratios(stations: &[Vec<f64>]) -> Vec<f64> {
    let n = stations.len() as f64;
    let dim = stations[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|k| stations.iter().map(|s| s[k]).sum::<f64>() / n)
        .collect();
    let cov = DMatrix::from_fn(dim, dim, |i, j| {
        stations
            .iter()
            .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
            .sum::<f64>()
            / n
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|e| e.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let top = ev[0];
    ev.iter()
        .map(|e| if top > 0.0 { e / top } else { 0.0 })
        .collect()
}

/// `Σ (a_i − ā)(a_i − ā)ᵀ` by explicit sums.
pub fn spread(stations: &[Vec<f64>]) -> DMatrix<f64> {
    let n = stations.len() as f64;
    let dim = stations[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|k| stations.iter().map(|s| s[k]).sum::<f64>() / n)
        .collect();
    DMatrix::from_fn(dim, dim, |i, j| {
        stations
            .iter()
            .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
            .sum::<f64>()
    })
}

pub fn coords(s: &Scenario) -> (Vec<Vec<f64>>, Vec<f64>) {
    (
        s.stations().iter().map(|a| a.coords().to_vec()).collect(),
        s.ground_truth().coords().to_vec(),
    )
}
