//! The linked-shrinkage prior and its variants.
//!
//! ```text
//! y_i    ~ N(α + Σ_j β_j x_ij + Σ_{j<k} β_jk x_ij x_ik, σ²)
//! α      ~ N(0, 10²)
//! β_j    ~ N(0, σ² τ_j²)
//! β_jk   ~ N(0, σ² τ_j τ_k τ_int)
//! τ_j    ~ C⁺(0, 1)
//! τ_int  ~ U(0.01, 1)
//! σ²     ~ IG(1, 0.001)            (shape–rate)
//! ```
//!
//! Variants change only the relative prior variances:
//!
//! | variant      | main             | interaction               |
//! |--------------|------------------|---------------------------|
//! | `Bayint`     | τ_j²             | τ_j τ_k τ_int             |
//! | `BayintStar` | τ_j²             | τ_j τ_k (τ_int ≡ 1)       |
//! | `Bayintadd`  | τ_j²             | (τ_j² + τ_k²)/2 · τ_int   |
//! | `Bay0int`    | fixed sd 10      | τ_j τ_k τ_int             |
//! | `Bayloc`     | own τ²           | own τ², no τ_int          |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{DesignMatrix, FeatureMap};
use crate::error::{Error, Result};
use crate::special::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Bayint,
    #[serde(rename = "bayintstar")]
    BayintStar,
    Bayintadd,
    Bay0int,
    Bayloc,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Bayint, Variant::BayintStar, Variant::Bayintadd, Variant::Bay0int, Variant::Bayloc];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bayint => "bayint",
            Variant::BayintStar => "bayintstar",
            Variant::Bayintadd => "bayintadd",
            Variant::Bay0int => "bay0int",
            Variant::Bayloc => "bayloc",
        }
    }

    /// Whether τ_int is a free parameter.
    pub fn samples_tau_int(self) -> bool {
        matches!(self, Variant::Bayint | Variant::Bayintadd | Variant::Bay0int)
    }

    /// Number of local scales for `p` main columns and `q` interactions.
    pub fn n_tau(self, p: usize, q: usize) -> usize {
        match self {
            Variant::Bayloc => p + q,
            _ => p,
        }
    }

    /// Whether main effects carry a σ²-scaled shrinkage prior.
    pub fn shrinks_main(self) -> bool {
        !matches!(self, Variant::Bay0int)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bayint" => Ok(Variant::Bayint),
            "bayintstar" | "bayint*" => Ok(Variant::BayintStar),
            "bayintadd" => Ok(Variant::Bayintadd),
            "bay0int" | "bayint0" => Ok(Variant::Bay0int),
            "bayloc" => Ok(Variant::Bayloc),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant `{other}`; expected one of bayint, bayintstar, bayintadd, bay0int, bayloc"
            ))),
        }
    }
}

/// Variant selector plus the fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub intercept_sd: f64,
    pub tau_int_bounds: (f64, f64),
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
    /// Prior sd of main effects under `Bay0int`.
    pub main_flat_sd: f64,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            intercept_sd: 10.0,
            tau_int_bounds: (0.01, 1.0),
            sigma2_shape: 1.0,
            sigma2_rate: 0.001,
            main_flat_sd: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.tau_int_bounds;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidArgument(format!("tau_int bounds ({lo}, {hi}) must satisfy 0 < lo < hi")));
        }
        if !(self.intercept_sd > 0.0 && self.main_flat_sd > 0.0) {
            return Err(Error::InvalidArgument("prior standard deviations must be positive".into()));
        }
        if !(self.sigma2_shape > 0.0 && self.sigma2_rate > 0.0) {
            return Err(Error::InvalidArgument("sigma2 prior shape and rate must be positive".into()));
        }
        Ok(())
    }
}

/// One point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub alpha: f64,
    pub beta_main: Vec<f64>,
    pub beta_int: Vec<f64>,
    /// Length `p`, or `p + q` under `Bayloc`.
    pub tau: Vec<f64>,
    /// Ignored (and kept at 1) by `BayintStar` and `Bayloc`.
    pub tau_int: f64,
    pub sigma2: f64,
}

impl ModelState {
    /// Neutral starting point: β = 0, τ = 1, τ_int = 0.5 (1 where fixed).
    pub fn initial(spec: &ModelSpec, map: &FeatureMap, sigma2: f64) -> Self {
        let (p, q) = (map.p_columns(), map.q());
        Self {
            alpha: 0.0,
            beta_main: vec![0.0; p],
            beta_int: vec![0.0; q],
            tau: vec![1.0; spec.variant.n_tau(p, q)],
            tau_int: if spec.variant.samples_tau_int() { 0.5 } else { 1.0 },
            sigma2,
        }
    }

    /// Wrap a coefficient vector `[α, β_main…, β_int…]` with unit scales.
    pub fn from_coefficients(coefficients: &[f64], p: usize) -> Self {
        Self {
            alpha: coefficients[0],
            beta_main: coefficients[1..1 + p].to_vec(),
            beta_int: coefficients[1 + p..].to_vec(),
            tau: vec![1.0; p],
            tau_int: 1.0,
            sigma2: 1.0,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + self.beta_main.len() + self.beta_int.len());
        out.push(self.alpha);
        out.extend_from_slice(&self.beta_main);
        out.extend_from_slice(&self.beta_int);
        out
    }

    /// Shape checks against the variant and feature map.
    pub fn check_shape(&self, spec: &ModelSpec, map: &FeatureMap) -> Result<()> {
        let (p, q) = (map.p_columns(), map.q());
        if self.beta_main.len() != p || self.beta_int.len() != q {
            return Err(Error::Shape(format!(
                "state has {}+{} coefficients, feature map has {p}+{q}",
                self.beta_main.len(),
                self.beta_int.len()
            )));
        }
        let n_tau = spec.variant.n_tau(p, q);
        if self.tau.len() != n_tau {
            return Err(Error::Shape(format!(
                "{} expects {n_tau} local scales, state has {}",
                spec.variant,
                self.tau.len()
            )));
        }
        if !spec.variant.samples_tau_int() && self.tau_int != 1.0 {
            return Err(Error::InvalidState(format!("{} fixes tau_int at 1, got {}", spec.variant, self.tau_int)));
        }
        Ok(())
    }

    /// Support check: positive scales and variance, τ_int inside its bounds.
    pub fn in_support(&self, spec: &ModelSpec) -> bool {
        let (lo, hi) = spec.tau_int_bounds;
        self.sigma2 > 0.0
            && self.tau.iter().all(|&t| t > 0.0)
            && (!spec.variant.samples_tau_int() || (lo..=hi).contains(&self.tau_int))
    }

    fn all_finite(&self) -> bool {
        self.alpha.is_finite()
            && self.sigma2.is_finite()
            && self.tau_int.is_finite()
            && self.beta_main.iter().chain(&self.beta_int).chain(&self.tau).all(|v| v.is_finite())
    }
}

/// Prior variances relative to σ².
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVarianceTable {
    pub main_rel_var: Vec<f64>,
    pub int_rel_var: Vec<f64>,
}

/// Relative variance of an interaction whose parents have scales `tj`, `tk`.
#[inline]
fn linked_variance(variant: Variant, tj: f64, tk: f64, tau_int: f64) -> f64 {
    match variant {
        Variant::Bayint | Variant::Bay0int => tj * tk * tau_int,
        Variant::BayintStar => tj * tk,
        Variant::Bayintadd => 0.5 * (tj * tj + tk * tk) * tau_int,
        Variant::Bayloc => unreachable!("bayloc has no linked interactions"),
    }
}

pub fn prior_variances(spec: &ModelSpec, state: &ModelState, map: &FeatureMap) -> Result<PriorVarianceTable> {
    state.check_shape(spec, map)?;
    let p = map.p_columns();
    let tau = &state.tau;
    let main_rel_var = match spec.variant {
        Variant::Bay0int => vec![spec.main_flat_sd.powi(2) / state.sigma2; p],
        _ => tau[..p].iter().map(|t| t * t).collect(),
    };
    let int_rel_var = match spec.variant {
        Variant::Bayloc => tau[p..].iter().map(|t| t * t).collect(),
        v => map
            .interaction_index()
            .iter()
            .map(|&(j, k)| linked_variance(v, tau[j], tau[k], state.tau_int))
            .collect(),
    };
    Ok(PriorVarianceTable { main_rel_var, int_rel_var })
}

#[inline]
fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * x * x / var
}

#[inline]
pub(crate) fn ln_half_cauchy(t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (2.0 / PI).ln() - (t * t).ln_1p()
}

fn ln_inverse_gamma(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

/// Unnormalized log posterior: every density term is included with its
/// normalizing constant, so values are comparable across states.
pub fn log_joint(spec: &ModelSpec, state: &ModelState, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let map = x.feature_map();
    state.check_shape(spec, map)?;
    if y.len() != x.n_rows() {
        return Err(Error::Shape(format!("{} responses for {} rows", y.len(), x.n_rows())));
    }
    if !state.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log_joint inputs".into()));
    }
    if !state.in_support(spec) {
        return Ok(f64::NEG_INFINITY);
    }
    let s2 = state.sigma2;

    let fitted = x.predict(&state.coefficients());
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let n = y.len() as f64;
    let mut lp = -0.5 * n * (LN_2PI + s2.ln()) - 0.5 * rss / s2;

    lp += ln_normal(state.alpha, spec.intercept_sd.powi(2));
    let table = prior_variances(spec, state, map)?;
    for (b, v) in state.beta_main.iter().zip(&table.main_rel_var) {
        lp += ln_normal(*b, s2 * v);
    }
    for (b, v) in state.beta_int.iter().zip(&table.int_rel_var) {
        lp += ln_normal(*b, s2 * v);
    }
    lp += state.tau.iter().map(|&t| ln_half_cauchy(t)).sum::<f64>();
    if spec.variant.samples_tau_int() {
        let (lo, hi) = spec.tau_int_bounds;
        lp -= (hi - lo).ln();
    }
    lp += ln_inverse_gamma(s2, spec.sigma2_shape, spec.sigma2_rate);
    Ok(lp)
}

/// Full conditional of one local scale, up to an additive constant.
#[derive(Debug, Clone)]
pub struct TauConditional {
    variant: Variant,
    sigma2: f64,
    tau_int: f64,
    /// β² of the coefficient whose variance is τ² (absent for `Bay0int`).
    own: Option<f64>,
    /// `(partner τ, β_jk²)` for every linked interaction.
    links: Vec<(f64, f64)>,
}

impl TauConditional {
    pub fn log_density(&self, tau: f64) -> f64 {
        if !(tau > 0.0) {
            return f64::NEG_INFINITY;
        }
        let mut lp = ln_half_cauchy(tau);
        if let Some(b2) = self.own {
            lp += ln_normal_sq(b2, self.sigma2 * tau * tau);
        }
        for &(partner, b2) in &self.links {
            let v = linked_variance(self.variant, tau, partner, self.tau_int);
            lp += ln_normal_sq(b2, self.sigma2 * v);
        }
        lp
    }
}

#[inline]
fn ln_normal_sq(x2: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * x2 / var
}

/// Conditional log-density of local scale `j` as a function of its value.
///
/// For the linked variants `j` indexes a main column; under `Bayloc` it
/// indexes the `p + q` coefficients (mains first).
pub fn conditional_tau_logdensity(
    spec: &ModelSpec,
    state: &ModelState,
    map: &FeatureMap,
    j: usize,
) -> Result<TauConditional> {
    let (p, q) = (map.p_columns(), map.q());
    let n_tau = spec.variant.n_tau(p, q);
    if j >= n_tau {
        return Err(Error::InvalidArgument(format!("tau index {j} out of range (0..{n_tau})")));
    }
    let cond = match spec.variant {
        Variant::Bayloc => {
            let b = if j < p { state.beta_main[j] } else { state.beta_int[j - p] };
            TauConditional { variant: spec.variant, sigma2: state.sigma2, tau_int: 1.0, own: Some(b * b), links: vec![] }
        }
        v => TauConditional {
            variant: v,
            sigma2: state.sigma2,
            tau_int: if v.samples_tau_int() { state.tau_int } else { 1.0 },
            own: v.shrinks_main().then(|| state.beta_main[j].powi(2)),
            links: map
                .links(j)
                .iter()
                .map(|l| (state.tau[l.partner], state.beta_int[l.interaction].powi(2)))
                .collect(),
        },
    };
    Ok(cond)
}

/// Full conditional of τ_int on its bounded support.
#[derive(Debug, Clone)]
pub struct TauIntConditional {
    bounds: (f64, f64),
    sigma2: f64,
    /// `(τ-dependent base variance, β_jk²)` so the variance is `base · τ_int`.
    terms: Vec<(f64, f64)>,
}

impl TauIntConditional {
    pub fn new(spec: &ModelSpec, state: &ModelState, map: &FeatureMap) -> Result<Self> {
        if !spec.variant.samples_tau_int() {
            return Err(Error::InvalidArgument(format!("{} has no free tau_int", spec.variant)));
        }
        let tau = &state.tau;
        let terms = map
            .interaction_index()
            .iter()
            .zip(&state.beta_int)
            .map(|(&(j, k), b)| (linked_variance(spec.variant, tau[j], tau[k], 1.0), b * b))
            .collect();
        Ok(Self { bounds: spec.tau_int_bounds, sigma2: state.sigma2, terms })
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn log_density(&self, t: f64) -> f64 {
        if !(self.bounds.0..=self.bounds.1).contains(&t) {
            return f64::NEG_INFINITY;
        }
        self.terms.iter().map(|&(base, b2)| ln_normal_sq(b2, self.sigma2 * base * t)).sum()
    }
}
