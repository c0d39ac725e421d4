mod common;

use std::sync::Arc;

use linkshrink::{
    shapley_bruteforce, shapley_categorical, shapley_fast, shapley_posterior, ModelSpec, ModelState, PosteriorDraws, ShapleyQuery, Variant,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn oracle_gap(seed: u64, n_cont: usize, levels: &[usize], shift: f64) -> f64 {
    let mut rng = common::rng(seed);
    let map = common::feature_map(n_cont, levels);
    let state = common::random_coefficients(&mut rng, &map);
    let query = common::random_query(&mut rng, &map, 4, shift);
    let fast = shapley_categorical(&shapley_fast(&state, &query).unwrap(), &map);
    let brute = shapley_bruteforce(&state, &query).unwrap();
    max_abs_diff(&fast.phi, &brute.phi)
        .max(max_abs_diff(&fast.main, &brute.main))
        .max(max_abs_diff(&fast.int, &brute.int))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_matches_bruteforce(n_cont in 1usize..8, cat in proptest::option::of(2usize..6), centered in any::<bool>(), seed in 0u64..10_000) {
        let levels: Vec<usize> = cat.into_iter().collect();
        prop_assume!(n_cont + levels.len() >= 2);
        let gap = oracle_gap(seed, n_cont, &levels, if centered { 0.0 } else { 0.7 });
        prop_assert!(gap <= 1e-10, "gap {gap:e}");
    }

    #[test]
    fn efficiency(n_cont in 1usize..9, cat in proptest::option::of(2usize..5), seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let levels: Vec<usize> = cat.into_iter().collect();
        let map = common::feature_map(n_cont, &levels);
        let state = common::random_coefficients(&mut rng, &map);
        let query = common::random_query(&mut rng, &map, 3, 0.4);
        let att = shapley_fast(&state, &query).unwrap();
        for i in 0..3 {
            let total: f64 = att.phi.row(i).sum();
            let target = query.prediction(&state, i) - query.mean_prediction(&state);
            prop_assert!((total - target).abs() <= 1e-10 * target.abs().max(1.0));
        }
    }

    #[test]
    fn linearity(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let map = common::feature_map(4, &[3]);
        let a = common::random_coefficients(&mut rng, &map);
        let b = common::random_coefficients(&mut rng, &map);
        let sum = ModelState::from_coefficients(
            &a.coefficients().iter().zip(b.coefficients()).map(|(x, y)| x + y).collect::<Vec<_>>(),
            map.p_columns(),
        );
        let query = common::random_query(&mut rng, &map, 3, 0.2);
        let fa = shapley_fast(&a, &query).unwrap().phi;
        let fb = shapley_fast(&b, &query).unwrap().phi;
        let fs = shapley_fast(&sum, &query).unwrap().phi;
        prop_assert!(max_abs_diff(&(fa + fb), &fs) <= 1e-12);
    }
}

#[test]
fn main_only_centered_reduces_to_beta_times_x() {
    let mut rng = common::rng(21);
    let map = common::feature_map(5, &[]);
    let mut state = common::random_coefficients(&mut rng, &map);
    state.beta_int.iter_mut().for_each(|b| *b = 0.0);
    let x = common::random_design(&mut rng, &map, 4, 0.0);
    let query = ShapleyQuery::new(x.x_main.clone(), vec![0.0; 5], vec![0.3; map.q()], Arc::clone(&map)).unwrap();
    let att = shapley_fast(&state, &query).unwrap();
    for i in 0..4 {
        for c in 0..5 {
            assert_eq!(att.phi[(i, c)], state.beta_main[c] * x.x_main[(i, c)]);
            assert_eq!(att.int[(i, c)], 0.0);
        }
    }
}

#[test]
fn zero_individual_centered() {
    let mut rng = common::rng(22);
    let map = common::feature_map(4, &[]);
    let state = common::random_coefficients(&mut rng, &map);
    let moments: Vec<f64> = (0..map.q()).map(|_| common::normal(&mut rng)).collect();
    let query = ShapleyQuery::new(DMatrix::zeros(1, 4), vec![0.0; 4], moments.clone(), Arc::clone(&map)).unwrap();
    let att = shapley_fast(&state, &query).unwrap();
    for c in 0..4 {
        let expected: f64 = -0.5
            * map
                .interaction_index()
                .iter()
                .enumerate()
                .filter(|(_, &(j, k))| j == c || k == c)
                .map(|(r, _)| state.beta_int[r] * moments[r])
                .sum::<f64>();
        assert!((att.phi[(0, c)] - expected).abs() < 1e-14);
    }
}

#[test]
fn single_player_gets_everything() {
    let mut rng = common::rng(23);
    let map = common::feature_map(0, &[4]);
    let state = common::random_coefficients(&mut rng, &map);
    let query = common::random_query(&mut rng, &map, 5, 0.0);
    let brute = shapley_bruteforce(&state, &query).unwrap();
    for i in 0..5 {
        let target = query.prediction(&state, i) - query.mean_prediction(&state);
        assert!((brute.phi[(i, 0)] - target).abs() < 1e-12);
    }
}

#[test]
fn two_players_pure_interaction() {
    let map = common::feature_map(2, &[]);
    let state = ModelState::from_coefficients(&[0.4, 0.0, 0.0, 1.3], 2);
    let query =
        ShapleyQuery::new(DMatrix::from_row_slice(1, 2, &[0.7, -1.1]), vec![0.0, 0.0], vec![0.25], Arc::clone(&map))
            .unwrap();
    let brute = shapley_bruteforce(&state, &query).unwrap();
    let expected = 0.5 * 1.3 * (0.7 * -1.1 - 0.25);
    assert!((brute.phi[(0, 0)] - expected).abs() < 1e-14);
    assert!((brute.phi[(0, 1)] - expected).abs() < 1e-14);
}

#[test]
fn dummy_player_is_exactly_zero() {
    let mut rng = common::rng(24);
    let map = common::feature_map(5, &[3]);
    let mut state = common::random_coefficients(&mut rng, &map);
    let dummy = 2;
    state.beta_main[dummy] = 0.0;
    for l in map.links(dummy) {
        state.beta_int[l.interaction] = 0.0;
    }
    let query = common::random_query(&mut rng, &map, 6, 0.5);
    let fast = shapley_fast(&state, &query).unwrap();
    let brute = shapley_bruteforce(&state, &query).unwrap();
    for i in 0..6 {
        assert_eq!(fast.phi[(i, dummy)], 0.0);
        assert!(brute.phi[(i, dummy)].abs() < 1e-14);
    }
    // All contrast-column coefficients zero: the categorical aggregate is 0.
    let g = map.covariate_index("g0").unwrap();
    for c in map.covariates()[g].columns() {
        state.beta_main[c] = 0.0;
        for l in map.links(c) {
            state.beta_int[l.interaction] = 0.0;
        }
    }
    let agg = shapley_categorical(&shapley_fast(&state, &query).unwrap(), &map);
    assert!(agg.phi.column(g).iter().all(|&v| v == 0.0));
}

#[test]
fn symmetric_players_share_equally() {
    // Players 0 and 1: equal main effects, equal interactions with player 2,
    // equal observed values and exchangeable moments.
    let map = common::feature_map(3, &[]);
    // pairs: (0,1), (0,2), (1,2)
    let state = ModelState::from_coefficients(&[0.1, 0.8, 0.8, -0.3, 0.5, 0.6, 0.6], 3);
    let x = DMatrix::from_row_slice(1, 3, &[1.2, 1.2, -0.4]);
    let query = ShapleyQuery::new(x, vec![0.1, 0.1, 0.0], vec![0.2, 0.35, 0.35], Arc::clone(&map)).unwrap();
    let fast = shapley_fast(&state, &query).unwrap();
    let brute = shapley_bruteforce(&state, &query).unwrap();
    assert!((fast.phi[(0, 0)] - fast.phi[(0, 1)]).abs() < 1e-15);
    assert!((brute.phi[(0, 0)] - brute.phi[(0, 1)]).abs() < 1e-14);
}

#[test]
fn categorical_aggregate_matches_single_player_enumeration() {
    for seed in 0..20 {
        let gap = oracle_gap(100 + seed, 4, &[5], if seed % 2 == 0 { 0.0 } else { 1.0 });
        assert!(gap <= 1e-10, "seed {seed}: {gap:e}");
    }
}

#[test]
fn too_many_players_refused() {
    let map = common::feature_map(21, &[]);
    let state = ModelState::from_coefficients(&vec![0.0; 1 + map.p_columns() + map.q()], map.p_columns());
    let query = ShapleyQuery::new(DMatrix::zeros(1, 21), vec![0.0; 21], vec![0.0; map.q()], Arc::clone(&map)).unwrap();
    let err = shapley_bruteforce(&state, &query).unwrap_err();
    assert!(err.to_string().contains("20"), "{err}");
}

#[test]
fn posterior_summaries_and_decomposition() {
    let mut rng = common::rng(25);
    let map = common::feature_map(3, &[3]);
    let spec = ModelSpec::new(Variant::Bayint);
    let states: Vec<ModelState> = (0..40)
        .map(|_| {
            let mut s = common::random_state(&mut rng, &spec, &map);
            s.tau_int = 0.5;
            s
        })
        .collect();
    let draws = PosteriorDraws::from_states(spec, Arc::clone(&map), states.clone()).unwrap();
    let query = common::random_query(&mut rng, &map, 3, 0.0);
    let res = shapley_posterior(&draws, &query, 0.9).unwrap();
    assert_eq!(res.n_covariates(), map.p_covariates());
    for i in 0..3 {
        for c in 0..res.n_covariates() {
            let per_draw: Vec<f64> = states
                .iter()
                .map(|s| shapley_categorical(&shapley_fast(s, &query).unwrap(), &map).phi[(i, c)])
                .collect();
            let mean = per_draw.iter().sum::<f64>() / 40.0;
            let cell = res.phi_at(i, c);
            assert!((cell.mean - mean).abs() < 1e-12);
            assert!(cell.lower <= cell.mean && cell.mean <= cell.upper);
            let k = res.cell(i, c);
            assert!((res.main[k].mean + res.int[k].mean - cell.mean).abs() < 1e-12);
        }
    }
    // Degenerate draws give zero-width intervals at the point value.
    let same = PosteriorDraws::from_states(spec, Arc::clone(&map), vec![states[0].clone(); 10]).unwrap();
    let res = shapley_posterior(&same, &query, 0.95).unwrap();
    let point = shapley_categorical(&shapley_fast(&states[0], &query).unwrap(), &map);
    for i in 0..3 {
        for c in 0..res.n_covariates() {
            let s = res.phi_at(i, c);
            assert!(s.upper - s.lower < 1e-12);
            assert!((s.mean - point.phi[(i, c)]).abs() < 1e-12);
        }
    }
}

#[test]
fn mismatched_shapes_are_errors() {
    let map = common::feature_map(3, &[]);
    assert!(ShapleyQuery::new(DMatrix::zeros(1, 2), vec![0.0; 3], vec![0.0; 3], Arc::clone(&map)).is_err());
    let state = ModelState::from_coefficients(&[0.0, 1.0], 1);
    let query = ShapleyQuery::new(DMatrix::zeros(1, 3), vec![0.0; 3], vec![0.0; 3], map).unwrap();
    assert!(shapley_fast(&state, &query).is_err());
}
