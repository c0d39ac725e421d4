mod common;

use linkshrink::ols::{fit_ols_matrix, t_p_value};
use linkshrink::{fit_ols, Error};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FIXTURE: &str = include_str!("fixtures/t_tail.csv");

#[test]
fn t_tail_matches_high_precision_reference() {
    let mut worst: f64 = 0.0;
    for line in FIXTURE.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (t, dof, p) = (f[0], f[1], f[2]);
        let got = t_p_value(t, dof);
        let err = (got - p).abs();
        worst = worst.max(err);
        assert!(err <= 1e-12, "t={t} dof={dof}: {got} vs {p} (|Δ| {err:e})");
    }
    assert!(worst <= 1e-12);
}

proptest! {
    #[test]
    fn p_value_symmetric_and_monotone(t in 0.0f64..40.0, dt in 0.001f64..5.0, dof in 1.0f64..2000.0) {
        let p = t_p_value(t, dof);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!(p, t_p_value(-t, dof));
        prop_assert!(t_p_value(t + dt, dof) <= p);
    }
}

fn random_problem(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = common::rng(seed);
    let z = DMatrix::from_fn(n, d, |_, j| if j == 0 { 1.0 } else { common::normal(&mut rng) });
    let y = (0..n).map(|_| common::normal(&mut rng)).collect();
    (z, y)
}

fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("c{j}")).collect()
}

#[test]
fn matches_normal_equations() {
    for seed in 0..10 {
        let (z, y) = random_problem(seed, 50, 6);
        let fit = fit_ols_matrix(&z, &y, names(6)).unwrap();
        let zty = z.transpose() * DVector::from_column_slice(&y);
        let inv = (z.transpose() * &z).try_inverse().unwrap();
        let beta = &inv * zty;
        let resid = DVector::from_column_slice(&y) - &z * &beta;
        let s2 = resid.norm_squared() / 44.0;
        for j in 0..6 {
            assert!((fit.coefficients[j] - beta[j]).abs() < 1e-9);
            assert!((fit.standard_errors[j] - (s2 * inv[(j, j)]).sqrt()).abs() < 1e-9);
            assert!((fit.t_statistics[j] - beta[j] / fit.standard_errors[j]).abs() < 1e-8);
        }
        assert_eq!(fit.dof, 44);
        assert!((fit.residual_variance - s2).abs() < 1e-12);
    }
}

#[test]
fn exact_linear_response() {
    let (z, _) = random_problem(3, 30, 4);
    let beta = [1.5, -2.0, 0.25, 3.0];
    let y: Vec<f64> = (&z * DVector::from_column_slice(&beta)).iter().copied().collect();
    let fit = fit_ols_matrix(&z, &y, names(4)).unwrap();
    for (a, b) in fit.coefficients.iter().zip(beta) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(fit.residual_variance < 1e-25);
}

#[test]
fn orthonormal_design_gives_projections() {
    let (z, y) = random_problem(4, 40, 5);
    let q = z.qr().q();
    let fit = fit_ols_matrix(&q, &y, names(5)).unwrap();
    let proj = q.transpose() * DVector::from_column_slice(&y);
    for j in 0..5 {
        assert!((fit.coefficients[j] - proj[j]).abs() < 1e-12);
    }
}

#[test]
fn predictions_invariant_to_column_rescaling() {
    let (z, y) = random_problem(5, 40, 4);
    let scales = [1.0, 10.0, 0.01, 3.0];
    let zs = DMatrix::from_fn(40, 4, |i, j| z[(i, j)] * scales[j]);
    let a = fit_ols_matrix(&z, &y, names(4)).unwrap();
    let b = fit_ols_matrix(&zs, &y, names(4)).unwrap();
    for j in 0..4 {
        assert!((a.coefficients[j] - b.coefficients[j] * scales[j]).abs() < 1e-10);
        assert!((a.p_values[j] - b.p_values[j]).abs() < 1e-10);
    }
    let (pa, pb) = (a.predict(&z), b.predict(&zs));
    for (u, v) in pa.iter().zip(&pb) {
        assert!((u - v).abs() < 1e-10);
    }
}

#[test]
fn rank_deficiency_names_the_dependent_column() {
    let (mut z, y) = random_problem(6, 20, 4);
    for i in 0..20 {
        z[(i, 3)] = 2.0 * z[(i, 1)] - z[(i, 2)];
    }
    match fit_ols_matrix(&z, &y, names(4)) {
        Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["c3".to_string()]),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn design_matrix_entry_point() {
    let mut rng = common::rng(7);
    let map = common::feature_map(3, &[3]);
    let x = common::random_design(&mut rng, &map, 60, 0.0);
    let y: Vec<f64> = (0..60).map(|_| common::normal(&mut rng)).collect();
    let fit = fit_ols(&x, &y).unwrap();
    assert_eq!(fit.coefficients.len(), x.n_coefficients());
    assert_eq!(fit.names, map.coefficient_names());
    assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    let small = x.select_rows(&(0..10).collect::<Vec<_>>());
    assert!(fit_ols(&small, &y[..10]).is_err());
}
