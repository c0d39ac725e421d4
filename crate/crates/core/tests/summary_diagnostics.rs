mod common;

use std::sync::Arc;

use linkshrink::diagnostics::{ess_bulk, rank_normalized_rhat};
use linkshrink::summary::summarize;
use linkshrink::{compute_diagnostics, posterior_summary, ModelSpec, ModelState, PosteriorDraws, ResponseScale, Variant};

fn normal_chain(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = common::rng(seed);
    (0..n).map(|_| common::normal(&mut rng)).collect()
}

fn ar1(seed: u64, n: usize, rho: f64) -> Vec<f64> {
    let e = normal_chain(seed, n);
    let mut out = Vec::with_capacity(n);
    let mut v = 0.0;
    for x in e {
        v = rho * v + (1.0 - rho * rho).sqrt() * x;
        out.push(v);
    }
    out
}

#[test]
fn normal_reference_interval() {
    let draws = normal_chain(1, 10_000);
    let s = summarize(&draws, 0.95).unwrap();
    assert!((s.lower + 1.96).abs() < 0.05, "{}", s.lower);
    assert!((s.upper - 1.96).abs() < 0.05, "{}", s.upper);
}

#[test]
fn interval_endpoints_monotone_in_level() {
    let draws = normal_chain(2, 2_000);
    let mut prev = summarize(&draws, 0.5).unwrap();
    for level in [0.6, 0.8, 0.9, 0.95, 0.99] {
        let s = summarize(&draws, level).unwrap();
        assert!(s.lower <= prev.lower && s.upper >= prev.upper);
        prev = s;
    }
}

fn draws_from_chains(chains: &[Vec<f64>]) -> PosteriorDraws {
    let map = common::feature_map(1, &[]);
    let spec = ModelSpec::new(Variant::BayintStar);
    let mut states = Vec::new();
    let mut ids = Vec::new();
    let mut idx = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            let mut s = ModelState::initial(&spec, &map, 1.0);
            s.alpha = v;
            states.push(s);
            ids.push(c);
            idx.push(i);
        }
    }
    PosteriorDraws::new(spec, Arc::clone(&map), ResponseScale::default(), states, ids, idx).unwrap()
}

#[test]
fn pooled_mean_is_weighted_chain_mean() {
    let chains = vec![normal_chain(3, 300), normal_chain(4, 700)];
    let draws = draws_from_chains(&chains);
    let summary = posterior_summary(&draws, 0.9).unwrap();
    assert_eq!(summary[0].name, "alpha");
    let weighted = (chains[0].iter().sum::<f64>() + chains[1].iter().sum::<f64>()) / 1000.0;
    assert!((summary[0].summary.mean - weighted).abs() < 1e-12);
}

#[test]
fn duplicated_chains_have_unit_rhat() {
    let c = ar1(5, 1000, 0.5);
    let r = rank_normalized_rhat(&[c.clone(), c]);
    assert!((r - 1.0).abs() < 0.01, "{r}");
}

#[test]
fn shifted_chain_inflates_rhat() {
    let a = normal_chain(6, 1000);
    let b: Vec<f64> = normal_chain(7, 1000).iter().map(|v| v + 10.0).collect();
    let r = rank_normalized_rhat(&[a, b]);
    assert!(r > 1.5, "{r}");
}

#[test]
fn independent_draws_have_full_ess() {
    let chains: Vec<Vec<f64>> = (0..4).map(|c| normal_chain(10 + c, 1000)).collect();
    let ess = ess_bulk(&chains);
    assert!((ess - 4000.0).abs() < 0.2 * 4000.0, "{ess}");
    let sticky: Vec<Vec<f64>> = (0..4).map(|c| ar1(20 + c, 1000, 0.9)).collect();
    let ess = ess_bulk(&sticky);
    assert!(ess < 1000.0, "{ess}");
}

#[test]
fn diagnostics_report_rhat_and_ess_per_parameter() {
    let chains: Vec<Vec<f64>> = (0..3).map(|c| normal_chain(30 + c, 400)).collect();
    let d = compute_diagnostics(&draws_from_chains(&chains));
    let rhat = d.rhat.expect("three chains");
    assert_eq!(rhat.len(), d.names.len());
    assert!(rhat[0] >= 1.0 - 1e-6 && rhat[0] < 1.05);
    assert!(d.ess.iter().all(|&e| e <= 1200.0 + 1e-9));
    let single = compute_diagnostics(&draws_from_chains(&chains[..1]));
    assert!(single.rhat.is_none());
    assert!(!single.warnings.is_empty());
}
