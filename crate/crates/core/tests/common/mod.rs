#![allow(dead_code)]

use std::sync::Arc;

use linkshrink::{DesignMatrix, Encoding, FeatureMap, ModelSpec, ModelState, ShapleyQuery, Variant};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n_cont` continuous covariates followed by one categorical per entry of
/// `levels`.
pub fn feature_map(n_cont: usize, levels: &[usize]) -> Arc<FeatureMap> {
    let mut enc: Vec<(String, Encoding)> =
        (0..n_cont).map(|i| (format!("x{i}"), Encoding::Continuous { center: 0.0, scale: 1.0 })).collect();
    for (g, &l) in levels.iter().enumerate() {
        let levels = (0..l).map(|k| format!("L{k}")).collect();
        enc.push((format!("g{g}"), Encoding::Categorical { levels }));
    }
    Arc::new(FeatureMap::new(enc).unwrap())
}

/// Random standardized design: continuous columns are normal (shifted by
/// `shift` so they need not be centered), binary-like columns are ±1 and
/// categorical groups follow the sum-to-zero coding of a random level.
pub fn random_design(rng: &mut ChaCha8Rng, map: &Arc<FeatureMap>, n: usize, shift: f64) -> DesignMatrix {
    let mut x = DMatrix::zeros(n, map.p_columns());
    for cov in map.covariates() {
        match &cov.encoding {
            Encoding::Categorical { levels } => {
                let l = levels.len();
                for i in 0..n {
                    let level = rng.random_range(0..l);
                    for (c, col) in cov.columns().enumerate() {
                        x[(i, col)] = if level == l - 1 {
                            -1.0
                        } else if level == c {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
            Encoding::Binary { .. } => {
                for i in 0..n {
                    x[(i, cov.first_column)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                }
            }
            Encoding::Continuous { .. } => {
                for i in 0..n {
                    x[(i, cov.first_column)] = normal(rng) + shift;
                }
            }
        }
    }
    DesignMatrix::from_main(x, Arc::clone(map)).unwrap()
}

pub fn random_coefficients(rng: &mut ChaCha8Rng, map: &FeatureMap) -> ModelState {
    let (p, q) = (map.p_columns(), map.q());
    let coefs: Vec<f64> = (0..1 + p + q).map(|_| normal(rng)).collect();
    ModelState::from_coefficients(&coefs, p)
}

/// A full random state in the support of `spec`.
pub fn random_state(rng: &mut ChaCha8Rng, spec: &ModelSpec, map: &FeatureMap) -> ModelState {
    let mut s = random_coefficients(rng, map);
    s.tau = (0..spec.variant.n_tau(map.p_columns(), map.q())).map(|_| rng.random_range(0.05..3.0)).collect();
    s.tau_int = if spec.variant.samples_tau_int() { rng.random_range(0.01..1.0) } else { 1.0 };
    s.sigma2 = rng.random_range(0.2..3.0);
    s
}

/// Query for `m` random individuals with moments from a random reference
/// sample.
pub fn random_query(rng: &mut ChaCha8Rng, map: &Arc<FeatureMap>, m: usize, shift: f64) -> ShapleyQuery {
    let reference = random_design(rng, map, 50, shift);
    let individuals = random_design(rng, map, m, shift);
    ShapleyQuery::from_reference(&individuals, &reference).unwrap()
}

pub const ALL_VARIANTS: [Variant; 5] = Variant::ALL;

/// Relative prior variances written out per variant, independently of the
/// library's table.
pub fn relative_variances(spec: &ModelSpec, state: &ModelState, map: &FeatureMap) -> (Vec<f64>, Vec<f64>) {
    let variant = spec.variant;
    let p = map.p_columns();
    let t = &state.tau;
    let main = (0..p)
        .map(|j| match variant {
            Variant::Bay0int => spec.main_flat_sd.powi(2) / state.sigma2,
            _ => t[j] * t[j],
        })
        .collect();
    let int = map
        .interaction_index()
        .iter()
        .enumerate()
        .map(|(r, &(j, k))| match variant {
            Variant::Bayint | Variant::Bay0int => t[j] * t[k] * state.tau_int,
            Variant::BayintStar => t[j] * t[k],
            Variant::Bayintadd => 0.5 * (t[j] * t[j] + t[k] * t[k]) * state.tau_int,
            Variant::Bayloc => t[p + r] * t[p + r],
        })
        .collect();
    (main, int)
}

/// One draw from the prior described by `spec`.
pub fn prior_draw(rng: &mut ChaCha8Rng, spec: &ModelSpec, map: &FeatureMap) -> ModelState {
    let variant = spec.variant;
    let (p, q) = (map.p_columns(), map.q());
    let n_tau = if variant == Variant::Bayloc { p + q } else { p };
    let tau = (0..n_tau).map(|_| (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan().abs()).collect();
    let tau_int = match variant {
        Variant::BayintStar | Variant::Bayloc => 1.0,
        _ => rng.random_range(spec.tau_int_bounds.0..spec.tau_int_bounds.1),
    };
    let g: f64 = rand_distr::Gamma::new(spec.sigma2_shape, 1.0).unwrap().sample(rng);
    let sigma2 = spec.sigma2_rate / g;
    let mut s = ModelState { alpha: spec.intercept_sd * normal(rng), beta_main: vec![0.0; p], beta_int: vec![0.0; q], tau, tau_int, sigma2 };
    let (mv, iv) = relative_variances(spec, &s, map);
    for j in 0..p {
        s.beta_main[j] = (sigma2 * mv[j]).sqrt() * normal(rng);
    }
    for r in 0..q {
        s.beta_int[r] = (sigma2 * iv[r]).sqrt() * normal(rng);
    }
    s
}

/// `y ~ N(Zθ, σ²)`.
pub fn simulate_response(rng: &mut ChaCha8Rng, x: &DesignMatrix, state: &ModelState) -> Vec<f64> {
    let sd = state.sigma2.sqrt();
    x.predict(&state.coefficients()).into_iter().map(|m| m + sd * normal(rng)).collect()
}
