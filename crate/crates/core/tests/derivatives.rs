mod common;

use common::*;
use toa_lift::objectives::{
    evaluate, gradient, hessian, lambda_quartic_at, ObjectiveKind, ParameterVector,
};
use toa_lift::scenario::seeded_rng;

const POINTS: usize = 200;

#[test]
fn values_match_coordinate_formula() {
    let mut rng = seeded_rng(11);
    for kind in ObjectiveKind::ALL {
        for dim in [2, 3] {
            for _ in 0..50 {
                let (s, p) = random_setup(&mut rng, kind, dim, 5);
                let (stations, truth) = coords(&s);
                let expected = naive_value(
                    kind,
                    &stations,
                    &truth,
                    p.position.coords(),
                    p.lambda.unwrap_or(0.0),
                );
                let got = evaluate(kind, &s, &p).unwrap();
                assert!(
                    (got - expected).abs() <= 1e-12 * expected.max(1.0),
                    "{kind}: {got} vs {expected}"
                );
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = seeded_rng(12);
    for kind in ObjectiveKind::ALL {
        let mut worst = 0.0f64;
        for i in 0..POINTS {
            let (s, p) = random_setup(&mut rng, kind, 2 + i % 2, 4 + i % 4);
            let analytic = gradient(kind, &s, &p).unwrap();
            let fd = fd_gradient(kind, &s, &p);
            worst = worst.max(rel_err(analytic.as_slice(), fd.as_slice()));
        }
        assert!(
            worst < 1e-6,
            "{kind}: worst relative gradient error {worst:e}"
        );
    }
}

#[test]
fn hessians_match_central_differences() {
    let mut rng = seeded_rng(13);
    for kind in ObjectiveKind::ALL {
        let mut worst = 0.0f64;
        for i in 0..POINTS {
            let (s, p) = random_setup(&mut rng, kind, 2 + i % 2, 4 + i % 4);
            let analytic = hessian(kind, &s, &p).unwrap();
            let fd = fd_hessian(kind, &p, |q| gradient(kind, &s, q).unwrap());
            worst = worst.max(rel_err(analytic.as_slice(), fd.as_slice()));
        }
        assert!(
            worst < 1e-5,
            "{kind}: worst relative Hessian error {worst:e}"
        );
    }
}

#[test]
fn lambda_derivatives_match_polynomial_differences() {
    // FL2 restricted to λ is a quartic, so a five-point stencil with h = 1/2
    // recovers the fourth derivative up to rounding.
    let mut rng = seeded_rng(14);
    for _ in 0..50 {
        let (s, p) = random_setup(&mut rng, ObjectiveKind::FL2, 2, 5);
        let lambda = p.lambda.unwrap();
        let f = |l: f64| {
            let q = ParameterVector::lifted(p.position.clone(), l);
            evaluate(ObjectiveKind::FL2, &s, &q).unwrap()
        };
        let h = 0.5;
        let f0 = f(lambda);
        let (fp, fm) = (f(lambda + h), f(lambda - h));
        let (fp2, fm2) = (f(lambda + 2.0 * h), f(lambda - 2.0 * h));
        let fourth = (fp2 - 4.0 * fp + 6.0 * f0 - 4.0 * fm + fm2) / h.powi(4);
        let third = (fp2 - 2.0 * fp + 2.0 * fm - fm2) / (2.0 * h.powi(3));
        let (d2, d3, d4) = lambda_quartic_at(&s, &p).unwrap();
        let scale = f0.abs().max(1.0) / h.powi(4);
        assert!((d4 - fourth).abs() < 1e-10 * scale, "{d4} vs {fourth}");
        assert!((d3 - third).abs() < 1e-10 * scale, "{d3} vs {third}");
        let hl = hessian(ObjectiveKind::FL2, &s, &p).unwrap();
        assert!((d2 - hl[(2, 2)]).abs() <= 1e-9 * d2.abs().max(1.0));
    }
}

#[test]
fn fourth_lambda_derivative_at_ground_truth() {
    let mut rng = seeded_rng(15);
    for n in [1usize, 4, 7] {
        let stations: Vec<Vec<f64>> = (0..n).map(|_| random_point(&mut rng, 3, 10.0)).collect();
        let truth = random_point(&mut rng, 3, 10.0);
        let s = scenario_from(&stations, &truth);
        let at_g = ParameterVector::lifted(s.ground_truth().clone(), 0.0);
        let (d2, d3, d4) = lambda_quartic_at(&s, &at_g).unwrap();
        assert_eq!((d2, d3, d4), (0.0, 0.0, 6.0 * n as f64));
        // F = N λ⁴ / 4 along λ at G.
        let f = |l: f64| {
            evaluate(
                ObjectiveKind::FL2,
                &s,
                &ParameterVector::lifted(s.ground_truth().clone(), l),
            )
            .unwrap()
        };
        let stencil = (2.0 * f(1.0) - 8.0 * f(0.5) + 6.0 * f(0.0)) * 16.0;
        assert_eq!(stencil, 6.0 * n as f64);
    }
}
