mod common;

use std::sync::Arc;

use linkshrink::eval::{
    detect, master_labels, r_squared, rmse, roc_points, run_protocol, two_step, DetectionRule, EvalConfig, Evidence,
    Label, Method,
};
use linkshrink::synth::{generate_master, noise_coefficients, SynthConfig, SynthSchema};
use linkshrink::{fit_ols, ModelSpec, ModelState, PosteriorDraws, SamplerConfig, Variant};
use proptest::prelude::*;

#[test]
fn rmse_examples() {
    let truth = vec![1.0, -2.0, 0.5];
    assert_eq!(rmse(&[truth.clone(), truth.clone()], &truth).unwrap(), vec![0.0; 3]);
    let off = rmse(&[vec![1.2, -2.0, 0.5]], &truth).unwrap();
    assert!((off[0] - 0.2).abs() < 1e-15);
    let c = 0.3;
    let alt: Vec<Vec<f64>> = (0..6).map(|b| truth.iter().map(|t| t + if b % 2 == 0 { c } else { -c }).collect()).collect();
    for v in rmse(&alt, &truth).unwrap() {
        assert!((v - c).abs() < 1e-15);
    }
    assert!(rmse(&[vec![1.0]], &truth).is_err());
}

proptest! {
    #[test]
    fn rmse_invariant_to_replicate_order(seed in 0u64..1000, b in 1usize..12) {
        let mut rng = common::rng(seed);
        let est: Vec<Vec<f64>> = (0..b).map(|_| (0..4).map(|_| common::normal(&mut rng)).collect()).collect();
        let truth: Vec<f64> = (0..4).map(|_| common::normal(&mut rng)).collect();
        let mut rev = est.clone();
        rev.reverse();
        let a = rmse(&est, &truth).unwrap();
        let r = rmse(&rev, &truth).unwrap();
        for (x, y) in a.iter().zip(&r) {
            prop_assert!((x - y).abs() <= 1e-14);
            prop_assert!(*x >= 0.0);
        }
    }

    #[test]
    fn r_squared_shift_invariance(seed in 0u64..1000, shift in -50.0f64..50.0) {
        let mut rng = common::rng(seed);
        let y: Vec<f64> = (0..20).map(|_| common::normal(&mut rng)).collect();
        let pred: Vec<f64> = y.iter().map(|v| v + 0.5 * common::normal(&mut rng)).collect();
        let ybar = 0.1;
        let a = r_squared(&y, &pred, ybar).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let ps: Vec<f64> = pred.iter().map(|v| v + shift).collect();
        let b = r_squared(&ys, &ps, ybar + shift).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a <= 1.0);
    }
}

fn alpha_draws(values: Vec<f64>) -> PosteriorDraws {
    let map = common::feature_map(1, &[]);
    let spec = ModelSpec::new(Variant::BayintStar);
    let states = values
        .into_iter()
        .map(|v| {
            let mut s = ModelState::initial(&spec, &map, 1.0);
            s.alpha = v;
            s
        })
        .collect();
    PosteriorDraws::from_states(spec, Arc::clone(&map), states).unwrap()
}

#[test]
fn detection_rules() {
    let span = |lo: f64, hi: f64| (0..=1000).map(|i| lo + (hi - lo) * i as f64 / 1000.0).collect::<Vec<_>>();
    // With a uniform grid the 99.9% interval is essentially the full range.
    let d = detect(Evidence::Draws(&alpha_draws(span(-0.1, 0.2))), DetectionRule::Credible(0.999)).unwrap();
    assert!(!d[0]);
    let d = detect(Evidence::Draws(&alpha_draws(span(0.05, 0.2))), DetectionRule::Credible(0.999)).unwrap();
    assert!(d[0]);
    let d = detect(Evidence::PValues(&[0.009, 0.01, 0.011]), DetectionRule::PValue(0.01)).unwrap();
    assert_eq!(d, vec![true, true, false]);
    assert!(detect(Evidence::PValues(&[0.1]), DetectionRule::Credible(0.95)).is_err());
}

#[test]
fn roc_extremes_and_monotonicity() {
    let labels = vec![Label::Positive, Label::Negative, Label::Indeterminate, Label::Positive, Label::Negative];
    let all = vec![vec![vec![true; 5]; 3]];
    let none = vec![vec![vec![false; 5]; 3]];
    let p = roc_points(&all, &labels, &[0.05]).unwrap()[0];
    assert_eq!((p.sensitivity, p.specificity), (1.0, 0.0));
    let p = roc_points(&none, &labels, &[0.05]).unwrap()[0];
    assert_eq!((p.sensitivity, p.specificity), (0.0, 1.0));
    assert!(roc_points(&all, &[Label::Negative; 5], &[0.05]).is_err());

    let mut rng = common::rng(3);
    let grid = [0.001, 0.005, 0.01, 0.05, 0.1];
    let reps: Vec<Vec<f64>> = (0..10).map(|_| (0..5).map(|_| rand::Rng::random::<f64>(&mut rng).powi(3)).collect()).collect();
    let det: Vec<Vec<Vec<bool>>> =
        grid.iter().map(|&a| reps.iter().map(|ps| ps.iter().map(|&p| p <= a).collect()).collect()).collect();
    let roc = roc_points(&det, &labels, &grid).unwrap();
    for w in roc.windows(2) {
        assert!(w[1].sensitivity >= w[0].sensitivity);
        assert!(w[1].specificity <= w[0].specificity);
    }
}

#[test]
fn r_squared_examples() {
    let y = [1.0, 2.0, 4.0, 3.0, 5.0];
    let ybar = 3.0;
    assert_eq!(r_squared(&y, &y, ybar).unwrap(), 1.0);
    assert_eq!(r_squared(&y, &[ybar; 5], ybar).unwrap(), 0.0);
    let pred = [3.0, 0.0, 6.0, 6.0, 1.0];
    // SS_res = 4 + 4 + 4 + 9 + 16 = 37, SS_tot = 4 + 1 + 1 + 0 + 4 = 10
    assert!((r_squared(&y, &pred, ybar).unwrap() - (1.0 - 3.7)).abs() < 1e-15);
    assert!(r_squared(&[3.0; 5], &[1.0; 5], 3.0).is_err());
}

#[test]
fn master_labels_partition_coefficients() {
    let cfg = SynthConfig { n_master: 5_000, ..SynthConfig::default() };
    let master = generate_master(&cfg).unwrap();
    let map = master.feature_map();
    let fit = fit_ols(&master.design, master.data.response()).unwrap();
    let noise = noise_coefficients(map);
    let labels = master_labels(&fit, &noise).unwrap();
    let d = map.p_columns() + map.q();
    assert_eq!(labels.len(), d);
    let strict = 0.05 / d as f64;
    let expected_ind = (1..=d).filter(|&j| !noise[j] && fit.p_values[j] > strict && fit.p_values[j] <= 0.05).count();
    let count = |l: Label| labels.iter().filter(|&&x| x == l).count();
    assert_eq!(count(Label::Indeterminate), expected_ind);
    assert_eq!(count(Label::Positive) + count(Label::Negative) + count(Label::Indeterminate), d);
    assert!(labels.iter().zip(&noise[1..]).all(|(&l, &n)| !n || l == Label::Negative));
}

#[test]
fn two_step_keeps_interactions_of_significant_mains() {
    let cfg = SynthConfig {
        n_master: 2_000,
        noise_sd: 0.5,
        schema: SynthSchema { n_continuous: 3, n_binary: 1, categorical_levels: vec![], n_noise: 2 },
        ..SynthConfig::default()
    };
    let master = generate_master(&cfg).unwrap();
    let fit = two_step(&master.design, master.data.response(), 0.05).unwrap();
    let map = master.feature_map();
    let p = map.p_columns();
    for (r, &(j, k)) in map.interaction_index().iter().enumerate() {
        let kept = fit.p_values[1 + j] < 1.0 && fit.p_values[1 + k] < 1.0;
        if !kept {
            assert_eq!(fit.coefficients[1 + p + r], 0.0);
            assert_eq!(fit.p_values[1 + p + r], 1.0);
        }
    }
}

#[test]
fn protocol_smoke_run() {
    let cfg = EvalConfig {
        synth: SynthConfig {
            n_master: 1_500,
            n_train: 200,
            n_sets: 3,
            schema: SynthSchema { n_continuous: 2, n_binary: 1, categorical_levels: vec![3], n_noise: 1 },
            ..SynthConfig::default()
        },
        methods: vec![Method::Bayes(Variant::Bayint), Method::Ols, Method::TwoStep],
        sampler: SamplerConfig { n_chains: 2, n_warmup: 100, n_keep: 100, ..SamplerConfig::default() },
        detection_subsets: 3,
        coverage_individuals: 10,
        ..EvalConfig::default()
    };
    let report = run_protocol(&cfg).unwrap();
    let d = report.coefficient_names.len();
    for m in &report.methods {
        assert_eq!(m.rmse.len(), d);
        assert_eq!(m.estimates.len(), 3);
        assert_eq!(m.r2.len(), 3);
        assert!(m.rmse.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(m.roc.iter().all(|p| (0.0..=1.0).contains(&p.sensitivity) && (0.0..=1.0).contains(&p.specificity)));
        assert!(m.r2.iter().all(|(a, b)| *a <= 1.0 && *b <= 1.0));
    }
    assert!(report.method("bayint").unwrap().coverage.is_some());
    assert!(report.method("ols").unwrap().coverage.is_none());
    let dir = tempfile::tempdir().unwrap();
    report.write_dir(dir.path()).unwrap();
    for f in ["rmse.csv", "detection.csv", "roc.csv", "coverage.csv", "r2.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn ols_on_noiseless_data_has_no_error() {
    let cfg = EvalConfig {
        synth: SynthConfig { n_master: 2_000, n_train: 300, n_sets: 2, noise_sd: 0.0, ..SynthConfig::default() },
        methods: vec![Method::Ols],
        detection_subsets: 2,
        coverage_individuals: 0,
        ..EvalConfig::default()
    };
    let report = run_protocol(&cfg).unwrap();
    assert!(report.methods[0].rmse.iter().all(|&v| v < 1e-6));
}
