//! Exact interventional Shapley values for the pairwise-interaction model.
//!
//! For column `c` with value `x*_c`, means `E[x_j]` and second moments
//! `E[x_j x_k]` of a reference sample, the attribution is
//!
//! ```text
//! φ_c = β_c (x*_c − E[x_c])
//!     + ½ Σ_j β_jc (E[x_j] x*_c − E[x_j x_c] + x*_j x*_c − x*_j E[x_c])
//! ```
//!
//! where the sum runs over the interaction partners of `c`. The first term is
//! the main part, the sum the interaction part. Categorical covariates are
//! attributed by summing over their contrast columns.
//!
//! [`shapley_bruteforce`] evaluates the defining subset sum directly and
//! serves as an oracle.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::design::{interaction_moments, main_means, DesignMatrix, FeatureMap};
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::sampler::PosteriorDraws;
use crate::special::binomial;
use crate::summary::{summarize, Summary};

/// Largest number of players accepted by [`shapley_bruteforce`].
pub const MAX_BRUTEFORCE_PLAYERS: usize = 20;

/// Individuals to explain plus the frozen reference moments.
#[derive(Debug, Clone)]
pub struct ShapleyQuery {
    /// `m × p` standardized main-effect values.
    pub individuals: DMatrix<f64>,
    /// `E[x_j]`, length `p`.
    pub means: Vec<f64>,
    /// `E[x_j x_k]` aligned with the interaction index, length `q`.
    pub moments: Vec<f64>,
    pub feature_map: Arc<FeatureMap>,
}

impl ShapleyQuery {
    pub fn new(
        individuals: DMatrix<f64>,
        means: Vec<f64>,
        moments: Vec<f64>,
        feature_map: Arc<FeatureMap>,
    ) -> Result<Self> {
        let (p, q) = (feature_map.p_columns(), feature_map.q());
        if individuals.ncols() != p || means.len() != p || moments.len() != q {
            return Err(Error::Shape(format!(
                "query has {} columns, {} means and {} moments; feature map has p={p}, q={q}",
                individuals.ncols(),
                means.len(),
                moments.len()
            )));
        }
        Ok(Self { individuals, means, moments, feature_map })
    }

    /// Explain the rows of `individuals` with moments taken from `reference`.
    pub fn from_reference(individuals: &DesignMatrix, reference: &DesignMatrix) -> Result<Self> {
        if !Arc::ptr_eq(individuals.feature_map(), reference.feature_map())
            && individuals.feature_map() != reference.feature_map()
        {
            return Err(Error::Schema("individuals and reference use different feature maps".into()));
        }
        Self::new(
            individuals.x_main.clone(),
            main_means(reference),
            interaction_moments(reference)?,
            Arc::clone(reference.feature_map()),
        )
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.nrows()
    }

    /// Plug-in mean prediction `α + Σ β_j E[x_j] + Σ β_jk E[x_j x_k]`.
    pub fn mean_prediction(&self, state: &ModelState) -> f64 {
        state.alpha
            + dot(&state.beta_main, &self.means)
            + dot(&state.beta_int, &self.moments)
    }

    /// Model prediction for individual `i`.
    pub fn prediction(&self, state: &ModelState, i: usize) -> f64 {
        let x = self.individuals.row(i);
        let map = &self.feature_map;
        let mut f = state.alpha;
        for (j, b) in state.beta_main.iter().enumerate() {
            f += b * x[j];
        }
        for (r, &(j, k)) in map.interaction_index().iter().enumerate() {
            f += state.beta_int[r] * x[j] * x[k];
        }
        f
    }

    fn check_state(&self, state: &ModelState) -> Result<()> {
        let (p, q) = (self.feature_map.p_columns(), self.feature_map.q());
        if state.beta_main.len() != p || state.beta_int.len() != q {
            return Err(Error::Shape(format!(
                "state has {}+{} coefficients, query expects {p}+{q}",
                state.beta_main.len(),
                state.beta_int.len()
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Attributions for `m` individuals, one column per player.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub phi: DMatrix<f64>,
    pub main: DMatrix<f64>,
    pub int: DMatrix<f64>,
}

impl Attribution {
    fn zeros(m: usize, k: usize) -> Self {
        Self { phi: DMatrix::zeros(m, k), main: DMatrix::zeros(m, k), int: DMatrix::zeros(m, k) }
    }
}

/// Per-column attribution of one individual, written into `main`/`int`.
fn fast_row(state: &ModelState, query: &ShapleyQuery, x: &[f64], main: &mut [f64], int: &mut [f64]) {
    let map = &query.feature_map;
    let e = &query.means;
    for c in 0..x.len() {
        main[c] = state.beta_main[c] * (x[c] - e[c]);
        let mut acc = 0.0;
        for link in map.links(c) {
            let j = link.partner;
            let r = link.interaction;
            acc += state.beta_int[r] * (e[j] * x[c] - query.moments[r] + x[j] * x[c] - x[j] * e[c]);
        }
        int[c] = 0.5 * acc;
    }
}

/// Closed-form per-column Shapley values, O(p + q) per individual.
pub fn shapley_fast(state: &ModelState, query: &ShapleyQuery) -> Result<Attribution> {
    query.check_state(state)?;
    let m = query.n_individuals();
    let p = query.feature_map.p_columns();
    let mut out = Attribution::zeros(m, p);
    let mut x = vec![0.0; p];
    let mut main = vec![0.0; p];
    let mut int = vec![0.0; p];
    for i in 0..m {
        for (j, v) in x.iter_mut().enumerate() {
            *v = query.individuals[(i, j)];
        }
        fast_row(state, query, &x, &mut main, &mut int);
        for c in 0..p {
            out.main[(i, c)] = main[c];
            out.int[(i, c)] = int[c];
            out.phi[(i, c)] = main[c] + int[c];
        }
    }
    Ok(out)
}

/// Sum per-column attributions into one value per covariate.
pub fn shapley_categorical(per_column: &Attribution, map: &FeatureMap) -> Attribution {
    let m = per_column.phi.nrows();
    let mut out = Attribution::zeros(m, map.p_covariates());
    for (g, cov) in map.covariates().iter().enumerate() {
        for c in cov.columns() {
            for i in 0..m {
                out.phi[(i, g)] += per_column.phi[(i, c)];
                out.main[(i, g)] += per_column.main[(i, c)];
                out.int[(i, g)] += per_column.int[(i, c)];
            }
        }
    }
    out
}

/// Shapley values by explicit enumeration of player subsets, one player per
/// covariate (a categorical's contrast columns form one player). Returns one
/// column per covariate.
pub fn shapley_bruteforce(state: &ModelState, query: &ShapleyQuery) -> Result<Attribution> {
    query.check_state(state)?;
    let map = &query.feature_map;
    let players = map.p_covariates();
    if players > MAX_BRUTEFORCE_PLAYERS {
        return Err(Error::TooManyPlayers { got: players, max: MAX_BRUTEFORCE_PLAYERS });
    }
    let group = map.group_of();
    let weights: Vec<f64> = (0..players).map(|s| 1.0 / (players as f64 * binomial(players - 1, s))).collect();
    let m = query.n_individuals();
    let mut out = Attribution::zeros(m, players);
    let n_subsets = 1usize << players;
    let mut nu_main = vec![0.0; n_subsets];
    let mut nu_int = vec![0.0; n_subsets];
    for i in 0..m {
        let x = query.individuals.row(i);
        for s in 0..n_subsets {
            let plays = |j: usize| s >> group[j] & 1 == 1;
            nu_main[s] = state
                .beta_main
                .iter()
                .enumerate()
                .map(|(j, b)| b * if plays(j) { x[j] } else { query.means[j] })
                .sum();
            nu_int[s] = map
                .interaction_index()
                .iter()
                .enumerate()
                .map(|(r, &(j, k))| {
                    let v = match (plays(j), plays(k)) {
                        (true, true) => x[j] * x[k],
                        (true, false) => x[j] * query.means[k],
                        (false, true) => query.means[j] * x[k],
                        (false, false) => query.moments[r],
                    };
                    state.beta_int[r] * v
                })
                .sum();
        }
        for c in 0..players {
            let bit = 1usize << c;
            let (mut main, mut int) = (0.0, 0.0);
            for s in (0..n_subsets).filter(|s| s & bit == 0) {
                let w = weights[s.count_ones() as usize];
                main += w * (nu_main[s | bit] - nu_main[s]);
                int += w * (nu_int[s | bit] - nu_int[s]);
            }
            out.main[(i, c)] = main;
            out.int[(i, c)] = int;
            out.phi[(i, c)] = main + int;
        }
    }
    Ok(out)
}

/// Posterior summaries of per-covariate attributions.
#[derive(Debug, Clone)]
pub struct ShapleyResult {
    pub covariates: Vec<String>,
    pub n_individuals: usize,
    pub level: f64,
    /// Row-major `(individual, covariate)` summaries.
    pub phi: Vec<Summary>,
    pub main: Vec<Summary>,
    pub int: Vec<Summary>,
    /// Posterior means of `|φ|`, `|φ_main|` and `|φ_int|` per cell.
    pub abs_phi: Vec<f64>,
    pub abs_main: Vec<f64>,
    pub abs_int: Vec<f64>,
}

impl ShapleyResult {
    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn cell(&self, individual: usize, covariate: usize) -> usize {
        individual * self.covariates.len() + covariate
    }

    pub fn phi_at(&self, individual: usize, covariate: usize) -> &Summary {
        &self.phi[self.cell(individual, covariate)]
    }
}

/// Propagate every retained draw through the closed form and summarize per
/// individual and covariate.
pub fn shapley_posterior(draws: &PosteriorDraws, query: &ShapleyQuery, level: f64) -> Result<ShapleyResult> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if draws.feature_map() != &query.feature_map {
        return Err(Error::Schema("draws and query use different feature maps".into()));
    }
    for s in draws.states() {
        query.check_state(s)?;
    }
    let map = &query.feature_map;
    let p = map.p_columns();
    let k = map.p_covariates();
    let n_draws = draws.len();
    type Cells = Vec<([Summary; 3], [f64; 3])>;
    let rows: Vec<Cells> = (0..query.n_individuals())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = query.individuals.row(i).iter().copied().collect();
            let mut main = vec![0.0; p];
            let mut int = vec![0.0; p];
            // [covariate][draw]
            let mut phi_d = vec![vec![0.0; n_draws]; k];
            let mut main_d = vec![vec![0.0; n_draws]; k];
            let mut int_d = vec![vec![0.0; n_draws]; k];
            for (d, state) in draws.states().iter().enumerate() {
                fast_row(state, query, &x, &mut main, &mut int);
                for (g, cov) in map.covariates().iter().enumerate() {
                    let a: f64 = main[cov.columns()].iter().sum();
                    let b: f64 = int[cov.columns()].iter().sum();
                    main_d[g][d] = a;
                    int_d[g][d] = b;
                    phi_d[g][d] = a + b;
                }
            }
            (0..k)
                .map(|g| {
                    let abs = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>() / n_draws as f64;
                    Ok((
                        [summarize(&phi_d[g], level)?, summarize(&main_d[g], level)?, summarize(&int_d[g], level)?],
                        [abs(&phi_d[g]), abs(&main_d[g]), abs(&int_d[g])],
                    ))
                })
                .collect::<Result<Cells>>()
        })
        .collect::<Result<_>>()?;
    let mut out = ShapleyResult {
        covariates: map.covariates().iter().map(|c| c.name.clone()).collect(),
        n_individuals: query.n_individuals(),
        level,
        phi: Vec::with_capacity(rows.len() * k),
        main: Vec::with_capacity(rows.len() * k),
        int: Vec::with_capacity(rows.len() * k),
        abs_phi: Vec::with_capacity(rows.len() * k),
        abs_main: Vec::with_capacity(rows.len() * k),
        abs_int: Vec::with_capacity(rows.len() * k),
    };
    for row in rows {
        for ([a, b, c], [d, e, f]) in row {
            out.phi.push(a);
            out.main.push(b);
            out.int.push(c);
            out.abs_phi.push(d);
            out.abs_main.push(e);
            out.abs_int.push(f);
        }
    }
    Ok(out)
}
