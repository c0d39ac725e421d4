//! Blocked Gibbs sampler for the linked-shrinkage model.
//!
//! Each sweep performs, in order:
//!
//! 1. a joint Gaussian draw of `(α, β_main, β_int)` from its exact
//!    conditional, via one Cholesky factorization of
//!    `ZᵀZ + σ² · diag(prior precisions)` (the intercept's prior is not
//!    scaled by σ²);
//! 2. an inverse-gamma draw of σ²;
//! 3. a slice update of every local scale on the log scale;
//! 4. a slice update of τ_int over its bounded support (when free).
//!
//! Chains are independent and each owns a ChaCha stream selected by its
//! chain id, so output does not depend on the thread count.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, FeatureMap, ResponseScale};
use crate::error::{Error, Result};
use crate::model::{conditional_tau_logdensity, prior_variances, ModelSpec, ModelState, TauIntConditional};
use crate::slice::{slice_step, slice_step_bounded, SliceCounters, SliceError};

/// Parameter blocks that can be held fixed at their initial value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Freeze {
    #[serde(default)]
    pub tau: bool,
    #[serde(default)]
    pub tau_int: bool,
    #[serde(default)]
    pub sigma2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
    pub slice_width: f64,
    pub slice_max_steps: usize,
    #[serde(default)]
    pub freeze: Freeze,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 2500,
            n_keep: 2500,
            thin: 1,
            seed: 1,
            slice_width: 1.0,
            slice_max_steps: 50,
            freeze: Freeze::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_keep == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument("n_chains, n_keep and thin must be at least 1".into()));
        }
        if !(self.slice_width > 0.0) || self.slice_max_steps == 0 {
            return Err(Error::InvalidArgument("slice width and step cap must be positive".into()));
        }
        Ok(())
    }
}

/// Retained draws from one or more chains, in chain-major order.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    spec: ModelSpec,
    feature_map: Arc<FeatureMap>,
    response_scale: ResponseScale,
    states: Vec<ModelState>,
    chain_ids: Vec<usize>,
    draw_index: Vec<usize>,
    counters: Vec<SliceCounters>,
}

impl PosteriorDraws {
    pub fn new(
        spec: ModelSpec,
        feature_map: Arc<FeatureMap>,
        response_scale: ResponseScale,
        states: Vec<ModelState>,
        chain_ids: Vec<usize>,
        draw_index: Vec<usize>,
    ) -> Result<Self> {
        if states.len() != chain_ids.len() || states.len() != draw_index.len() {
            return Err(Error::Shape("draws, chain ids and draw indices differ in length".into()));
        }
        for s in &states {
            s.check_shape(&spec, &feature_map)?;
        }
        Ok(Self { spec, feature_map, response_scale, states, chain_ids, draw_index, counters: vec![] })
    }

    /// A single-chain object from a list of states (handy for point estimates
    /// and tests).
    pub fn from_states(spec: ModelSpec, feature_map: Arc<FeatureMap>, states: Vec<ModelState>) -> Result<Self> {
        let n = states.len();
        Self::new(spec, feature_map, ResponseScale::default(), states, vec![0; n], (0..n).collect())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn feature_map(&self) -> &Arc<FeatureMap> {
        &self.feature_map
    }

    pub fn response_scale(&self) -> ResponseScale {
        self.response_scale
    }

    pub fn states(&self) -> &[ModelState] {
        &self.states
    }

    pub fn chain_ids(&self) -> &[usize] {
        &self.chain_ids
    }

    pub fn draw_index(&self) -> &[usize] {
        &self.draw_index
    }

    pub fn slice_counters(&self) -> &[SliceCounters] {
        &self.counters
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_chains(&self) -> usize {
        let mut ids: Vec<usize> = self.chain_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// `alpha`, `b_<col>`, `b_<a>:<b>`, `tau_<…>`, `tau_int` (when free), `sigma2`.
    pub fn param_names(&self) -> Vec<String> {
        let map = &self.feature_map;
        let mut names: Vec<String> = map
            .coefficient_names()
            .into_iter()
            .enumerate()
            .map(|(i, n)| if i == 0 { n } else { format!("b_{n}") })
            .collect();
        let tau_targets: Vec<String> = match self.spec.variant.n_tau(map.p_columns(), map.q()) {
            n if n == map.p_columns() => map.column_names().to_vec(),
            _ => map.column_names().iter().cloned().chain(map.interaction_names()).collect(),
        };
        names.extend(tau_targets.into_iter().map(|n| format!("tau_{n}")));
        if self.spec.variant.samples_tau_int() {
            names.push("tau_int".into());
        }
        names.push("sigma2".into());
        names
    }

    pub fn n_params(&self) -> usize {
        let map = &self.feature_map;
        let (p, q) = (map.p_columns(), map.q());
        1 + p + q + self.spec.variant.n_tau(p, q) + usize::from(self.spec.variant.samples_tau_int()) + 1
    }

    /// Flatten one state into [`Self::param_names`] order.
    pub fn flatten(&self, state: &ModelState) -> Vec<f64> {
        let mut v = state.coefficients();
        v.extend_from_slice(&state.tau);
        if self.spec.variant.samples_tau_int() {
            v.push(state.tau_int);
        }
        v.push(state.sigma2);
        v
    }

    /// Inverse of [`Self::flatten`].
    pub fn unflatten(&self, values: &[f64]) -> Result<ModelState> {
        if values.len() != self.n_params() {
            return Err(Error::Shape(format!("{} values for {} parameters", values.len(), self.n_params())));
        }
        let map = &self.feature_map;
        let (p, q) = (map.p_columns(), map.q());
        let n_tau = self.spec.variant.n_tau(p, q);
        let mut at = 1 + p + q;
        let tau = values[at..at + n_tau].to_vec();
        at += n_tau;
        let tau_int = if self.spec.variant.samples_tau_int() {
            at += 1;
            values[at - 1]
        } else {
            1.0
        };
        Ok(ModelState {
            alpha: values[0],
            beta_main: values[1..1 + p].to_vec(),
            beta_int: values[1 + p..1 + p + q].to_vec(),
            tau,
            tau_int,
            sigma2: values[at],
        })
    }

    /// All draws of parameter `i`.
    pub fn param_values(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|s| param_at(&self.spec, &self.feature_map, s, i)).collect()
    }

    /// Draws of parameter `i` grouped by chain (ascending chain id).
    pub fn chains_of(&self, i: usize) -> Vec<Vec<f64>> {
        let mut ids: Vec<usize> = self.chain_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|&c| {
                self.states
                    .iter()
                    .zip(&self.chain_ids)
                    .filter(|(_, &id)| id == c)
                    .map(|(s, _)| param_at(&self.spec, &self.feature_map, s, i))
                    .collect()
            })
            .collect()
    }

    /// Posterior mean of `[α, β_main…, β_int…]`.
    pub fn coefficient_means(&self) -> Vec<f64> {
        let d = 1 + self.feature_map.p_columns() + self.feature_map.q();
        let mut acc = vec![0.0; d];
        for s in &self.states {
            for (a, v) in acc.iter_mut().zip(s.coefficients()) {
                *a += v;
            }
        }
        let n = self.states.len() as f64;
        acc.iter().map(|a| a / n).collect()
    }
}

fn param_at(spec: &ModelSpec, map: &FeatureMap, s: &ModelState, i: usize) -> f64 {
    let (p, q) = (map.p_columns(), map.q());
    let n_tau = spec.variant.n_tau(p, q);
    match i {
        0 => s.alpha,
        i if i <= p => s.beta_main[i - 1],
        i if i <= p + q => s.beta_int[i - 1 - p],
        i if i <= p + q + n_tau => s.tau[i - 1 - p - q],
        i if i == p + q + n_tau + 1 && spec.variant.samples_tau_int() => s.tau_int,
        _ => s.sigma2,
    }
}

/// One Gibbs sweep over all parameter blocks, with cached sufficient
/// statistics of the design.
pub struct GibbsKernel {
    spec: ModelSpec,
    map: Arc<FeatureMap>,
    z: DMatrix<f64>,
    gram: DMatrix<f64>,
    zty: DVector<f64>,
    y: DVector<f64>,
    slice_width: f64,
    slice_max_steps: usize,
    freeze: Freeze,
}

impl GibbsKernel {
    pub fn new(spec: &ModelSpec, x: &DesignMatrix, y: &[f64], cfg: &SamplerConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        if y.len() != x.n_rows() {
            return Err(Error::Shape(format!("{} responses for {} rows", y.len(), x.n_rows())));
        }
        if x.n_rows() < 2 {
            return Err(Error::InvalidArgument("sampler needs at least two observations".into()));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response contains {bad}")));
        }
        let z = x.full();
        let gram = z.tr_mul(&z);
        let y = DVector::from_column_slice(y);
        let zty = z.tr_mul(&y);
        Ok(Self {
            spec: *spec,
            map: Arc::clone(x.feature_map()),
            z,
            gram,
            zty,
            y,
            slice_width: cfg.slice_width,
            slice_max_steps: cfg.slice_max_steps,
            freeze: cfg.freeze,
        })
    }

    /// Replace the response while keeping the cached Gram matrix.
    pub fn set_response(&mut self, y: &[f64]) {
        self.y = DVector::from_column_slice(y);
        self.zty = self.z.tr_mul(&self.y);
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn sweep(&self, state: &mut ModelState, rng: &mut ChaCha8Rng, counters: &mut SliceCounters) -> Result<()> {
        let rss = self.update_coefficients(state, rng)?;
        if !self.freeze.sigma2 {
            self.update_sigma2(state, rss, rng)?;
        }
        if !self.freeze.tau {
            self.update_tau(state, rng, counters)?;
        }
        if !self.freeze.tau_int && self.spec.variant.samples_tau_int() {
            self.update_tau_int(state, rng, counters)?;
        }
        Ok(())
    }

    /// Draw the coefficient block; returns the new residual sum of squares.
    fn update_coefficients(&self, state: &mut ModelState, rng: &mut ChaCha8Rng) -> Result<f64> {
        let p = self.map.p_columns();
        let table = prior_variances(&self.spec, state, &self.map)?;
        let s2 = state.sigma2;
        let mut a = self.gram.clone();
        a[(0, 0)] += s2 / self.spec.intercept_sd.powi(2);
        for (j, v) in table.main_rel_var.iter().enumerate() {
            a[(1 + j, 1 + j)] += 1.0 / v;
        }
        for (r, v) in table.int_rel_var.iter().enumerate() {
            a[(1 + p + r, 1 + p + r)] += 1.0 / v;
        }
        let chol = a.cholesky().ok_or(Error::Cholesky)?;
        let mean = chol.solve(&self.zty);
        let mut noise = DVector::<f64>::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
        chol.l_dirty().tr_solve_lower_triangular_mut(&mut noise);
        let theta = mean + noise * s2.sqrt();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Cholesky);
        }
        state.alpha = theta[0];
        state.beta_main.copy_from_slice(&theta.as_slice()[1..1 + p]);
        state.beta_int.copy_from_slice(&theta.as_slice()[1 + p..]);
        let resid = &self.y - &self.z * theta;
        Ok(resid.norm_squared())
    }

    fn update_sigma2(&self, state: &mut ModelState, rss: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let table = prior_variances(&self.spec, state, &self.map)?;
        let mut shape = self.spec.sigma2_shape + 0.5 * self.y.len() as f64;
        let mut rate = self.spec.sigma2_rate + 0.5 * rss;
        if self.spec.variant.shrinks_main() {
            shape += 0.5 * state.beta_main.len() as f64;
            rate += state.beta_main.iter().zip(&table.main_rel_var).map(|(b, v)| 0.5 * b * b / v).sum::<f64>();
        }
        shape += 0.5 * state.beta_int.len() as f64;
        rate += state.beta_int.iter().zip(&table.int_rel_var).map(|(b, v)| 0.5 * b * b / v).sum::<f64>();
        let gamma = Gamma::new(shape, 1.0 / rate).map_err(|_| self.slice_error("sigma2", state))?;
        let precision: f64 = gamma.sample(rng);
        let s2 = 1.0 / precision;
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(self.slice_error("sigma2", state));
        }
        state.sigma2 = s2;
        Ok(())
    }

    fn update_tau(&self, state: &mut ModelState, rng: &mut ChaCha8Rng, counters: &mut SliceCounters) -> Result<()> {
        for j in 0..state.tau.len() {
            let cond = conditional_tau_logdensity(&self.spec, state, &self.map, j)?;
            let target = |u: f64| cond.log_density(u.exp()) + u;
            let u = slice_step(rng, state.tau[j].ln(), target, self.slice_width, self.slice_max_steps, counters)
                .map_err(|_| self.slice_error(&format!("tau[{j}]"), state))?;
            let t = u.exp();
            if !(t > 0.0 && t.is_finite()) {
                return Err(self.slice_error(&format!("tau[{j}]"), state));
            }
            state.tau[j] = t;
        }
        Ok(())
    }

    fn update_tau_int(&self, state: &mut ModelState, rng: &mut ChaCha8Rng, counters: &mut SliceCounters) -> Result<()> {
        let cond = TauIntConditional::new(&self.spec, state, &self.map)?;
        let (lo, hi) = cond.bounds();
        state.tau_int = slice_step_bounded(rng, state.tau_int, |t| cond.log_density(t), lo, hi, counters)
            .map_err(|e| match e {
                SliceError::NonFiniteStart | SliceError::Collapsed => self.slice_error("tau_int", state),
            })?;
        Ok(())
    }

    fn slice_error(&self, param: &str, state: &ModelState) -> Error {
        Error::SliceTarget {
            param: param.to_string(),
            state: format!(
                "sigma2={:e} tau_int={:e} tau={:?} alpha={:e}",
                state.sigma2, state.tau_int, state.tau, state.alpha
            ),
        }
    }
}

/// Per-chain generator: the seed picks the key, the chain id the stream.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Sample the posterior from the default starting point.
pub fn run_sampler(spec: &ModelSpec, x: &DesignMatrix, y: &[f64], cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    let n = y.len().max(2) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma2 = if var > 0.0 && var.is_finite() { var } else { 1.0 };
    let init = ModelState::initial(spec, x.feature_map(), sigma2);
    run_sampler_from(spec, x, y, cfg, &init)
}

/// Sample the posterior starting every chain at `init`. Frozen blocks stay
/// at their initial values.
pub fn run_sampler_from(
    spec: &ModelSpec,
    x: &DesignMatrix,
    y: &[f64],
    cfg: &SamplerConfig,
    init: &ModelState,
) -> Result<PosteriorDraws> {
    let kernel = GibbsKernel::new(spec, x, y, cfg)?;
    init.check_shape(spec, x.feature_map())?;
    if !init.in_support(spec) {
        return Err(Error::InvalidState("initial state outside the prior support".into()));
    }
    let chains: Vec<(Vec<ModelState>, SliceCounters)> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(cfg.seed, c);
            let mut state = init.clone();
            let mut counters = SliceCounters::default();
            let mut kept = Vec::with_capacity(cfg.n_keep);
            for _ in 0..cfg.n_warmup {
                kernel.sweep(&mut state, &mut rng, &mut counters)?;
            }
            for _ in 0..cfg.n_keep {
                for _ in 0..cfg.thin {
                    kernel.sweep(&mut state, &mut rng, &mut counters)?;
                }
                kept.push(state.clone());
            }
            Ok((kept, counters))
        })
        .collect::<Result<_>>()?;

    let mut states = Vec::with_capacity(cfg.n_chains * cfg.n_keep);
    let mut chain_ids = Vec::with_capacity(states.capacity());
    let mut draw_index = Vec::with_capacity(states.capacity());
    let mut counters = Vec::with_capacity(cfg.n_chains);
    for (c, (kept, ctr)) in chains.into_iter().enumerate() {
        for (i, s) in kept.into_iter().enumerate() {
            states.push(s);
            chain_ids.push(c);
            draw_index.push(i);
        }
        counters.push(ctr);
    }
    Ok(PosteriorDraws {
        spec: *spec,
        feature_map: Arc::clone(x.feature_map()),
        response_scale: ResponseScale::default(),
        states,
        chain_ids,
        draw_index,
        counters,
    })
}

impl PosteriorDraws {
    /// Attach the response transform used when fitting.
    pub fn with_response_scale(mut self, scale: ResponseScale) -> Self {
        self.response_scale = scale;
        self
    }
}
