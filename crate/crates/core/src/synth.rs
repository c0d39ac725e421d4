//! Synthetic master datasets and training subsets.
//!
//! Covariates come from a Gaussian copula: a latent multivariate normal with
//! the requested correlation is thresholded into binaries and categoricals,
//! continuous covariates keep their latent value, and noise covariates are
//! independent standard normals. The response is `α + Zβ + ε` on the
//! expanded (standardized) design of the master set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::design::{apply_feature_map, fit_feature_map, DesignMatrix, FeatureMap, RawColumn, RawDataset};
use crate::error::{Error, Result};

/// Covariate counts of a synthetic schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSchema {
    pub n_continuous: usize,
    pub n_binary: usize,
    /// Level count of each categorical covariate.
    pub categorical_levels: Vec<usize>,
    pub n_noise: usize,
}

impl Default for SynthSchema {
    fn default() -> Self {
        Self { n_continuous: 3, n_binary: 3, categorical_levels: vec![5], n_noise: 4 }
    }
}

impl SynthSchema {
    fn n_latent(&self) -> usize {
        self.n_continuous + self.n_binary + self.categorical_levels.len()
    }

    /// Covariate names in column order: `cont*`, `bin*`, `cat*`, `noise*`.
    pub fn covariate_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        names.extend((1..=self.n_continuous).map(|i| format!("cont{i}")));
        names.extend((1..=self.n_binary).map(|i| format!("bin{i}")));
        names.extend((1..=self.categorical_levels.len()).map(|i| format!("cat{i}")));
        names.extend((1..=self.n_noise).map(|i| format!("noise{i}")));
        names
    }
}

/// How the generating coefficients are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    /// Explicit `[α, β_main…, β_int…]`.
    Given { coefficients: Vec<f64> },
    /// Gaussian main effects and interactions, a random fraction of the
    /// interactions set to zero.
    Random { main_sd: f64, int_sd: f64, zero_fraction: f64 },
    /// The first `n_strong` covariates get large main effects and interact
    /// with each other; all other interactions are zero.
    Linked { n_strong: usize, main_strong: f64, main_weak: f64, int_strong: f64 },
}

impl TruthSpec {
    /// Four strong covariates with linked interactions.
    pub fn linked_default() -> Self {
        TruthSpec::Linked { n_strong: 4, main_strong: 0.6, main_weak: 0.3, int_strong: 0.3 }
    }
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::Random { main_sd: 0.3, int_sd: 0.1, zero_fraction: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_master: usize,
    pub n_train: usize,
    pub n_sets: usize,
    pub schema: SynthSchema,
    /// Common latent correlation used when `correlation` is absent.
    pub equicorrelation: f64,
    /// Full latent correlation over the non-noise covariates.
    pub correlation: Option<Vec<Vec<f64>>>,
    pub binary_prevalence: f64,
    pub intercept: f64,
    pub truth: TruthSpec,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_master: 21_570,
            n_train: 1_000,
            n_sets: 25,
            schema: SynthSchema::default(),
            equicorrelation: 0.2,
            correlation: None,
            binary_prevalence: 0.4,
            intercept: 1.0,
            truth: TruthSpec::default(),
            noise_sd: 1.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    fn latent_correlation(&self) -> Result<DMatrix<f64>> {
        let d = self.schema.n_latent();
        let m = match &self.correlation {
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidArgument(format!("correlation matrix must be {d}×{d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
            None => DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { self.equicorrelation }),
        };
        for i in 0..d {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("correlation matrix needs a unit diagonal".into()));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("correlation matrix is not symmetric".into()));
                }
            }
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_master < 2 {
            return Err(Error::InvalidArgument("master set needs at least two rows".into()));
        }
        if !(self.binary_prevalence > 0.0 && self.binary_prevalence < 1.0) {
            return Err(Error::InvalidArgument("binary prevalence must lie in (0, 1)".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument("noise sd must be finite and non-negative".into()));
        }
        if self.schema.categorical_levels.iter().any(|&l| l < 2) {
            return Err(Error::InvalidArgument("categoricals need at least two levels".into()));
        }
        if self.schema.covariate_names().is_empty() {
            return Err(Error::InvalidArgument("schema has no covariates".into()));
        }
        self.latent_correlation()?;
        Ok(())
    }
}

/// A generated master set with its generating coefficients.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: RawDataset,
    pub design: DesignMatrix,
    /// `[α, β_main…, β_int…]` on the master design's scale.
    pub truth: Vec<f64>,
}

impl SynthData {
    pub fn feature_map(&self) -> &Arc<FeatureMap> {
        self.design.feature_map()
    }
}

/// Which design columns belong to noise covariates.
pub fn noise_columns(map: &FeatureMap) -> Vec<bool> {
    let mut out = vec![false; map.p_columns()];
    for cov in map.covariates() {
        if cov.name.starts_with("noise") {
            for c in cov.columns() {
                out[c] = true;
            }
        }
    }
    out
}

/// Per coefficient `[α, mains…, interactions…]`: does it involve a noise
/// covariate?
pub fn noise_coefficients(map: &FeatureMap) -> Vec<bool> {
    let cols = noise_columns(map);
    let mut out = vec![false];
    out.extend(cols.iter().copied());
    out.extend(map.interaction_index().iter().map(|&(j, k)| cols[j] || cols[k]));
    out
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generate the master dataset and its response.
pub fn generate_master(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n = cfg.n_master;
    let schema = &cfg.schema;
    let corr = cfg.latent_correlation()?;
    let chol = corr
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("latent correlation matrix is not positive definite".into()))?;
    let l = chol.l();
    let d = schema.n_latent();

    let mut rng = stream(cfg.seed, 0);
    let mut latent = DMatrix::zeros(n, d);
    let mut z = DVector::zeros(d);
    for i in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        latent.row_mut(i).copy_from(&(&l * &z).transpose());
    }
    let mut noise = DMatrix::zeros(n, schema.n_noise);
    for v in noise.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }

    let std_normal = StatNormal::standard();
    let names = schema.covariate_names();
    let mut columns = Vec::with_capacity(names.len());
    let mut at = 0;
    for _ in 0..schema.n_continuous {
        columns.push(RawColumn::continuous(&names[at], latent.column(at).iter().copied().collect()));
        at += 1;
    }
    let cut = std_normal.inverse_cdf(cfg.binary_prevalence);
    for _ in 0..schema.n_binary {
        let vals: Vec<&str> = latent.column(at).iter().map(|&v| if v < cut { "1" } else { "0" }).collect();
        columns.push(RawColumn::binary(&names[at], vals));
        at += 1;
    }
    for &levels in &schema.categorical_levels {
        let cuts: Vec<f64> = (1..levels).map(|l| std_normal.inverse_cdf(l as f64 / levels as f64)).collect();
        let vals: Vec<String> = latent
            .column(at)
            .iter()
            .map(|&v| format!("L{}", 1 + cuts.iter().filter(|&&c| v >= c).count()))
            .collect();
        let mut col = RawColumn::categorical(&names[at], vals);
        if let crate::design::ColumnValues::Categorical { levels: lv, .. } = &mut col.values {
            *lv = Some((1..=levels).map(|l| format!("L{l}")).collect());
        }
        columns.push(col);
        at += 1;
    }
    for k in 0..schema.n_noise {
        columns.push(RawColumn::continuous(&names[at + k], noise.column(k).iter().copied().collect()));
    }

    let placeholder = RawDataset::new(columns.clone(), "y", vec![0.0; n])?;
    let map = Arc::new(fit_feature_map(&placeholder)?);
    let design = apply_feature_map(&map, &placeholder)?;
    let truth = draw_truth(cfg, &map)?;
    let mut y = design.predict(&truth);
    if cfg.noise_sd > 0.0 {
        let eps = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = stream(cfg.seed, 2);
        for v in &mut y {
            *v += eps.sample(&mut rng);
        }
    }
    let data = RawDataset::new(columns, "y", y)?;
    Ok(SynthData { data, design, truth })
}

fn draw_truth(cfg: &SynthConfig, map: &FeatureMap) -> Result<Vec<f64>> {
    let (p, q) = (map.p_columns(), map.q());
    let noise = noise_coefficients(map);
    let mut rng = stream(cfg.seed, 1);
    let mut beta = vec![0.0; 1 + p + q];
    match &cfg.truth {
        TruthSpec::Given { coefficients } => {
            if coefficients.len() != 1 + p + q {
                return Err(Error::Shape(format!(
                    "{} given coefficients, design has {}",
                    coefficients.len(),
                    1 + p + q
                )));
            }
            return Ok(coefficients.clone());
        }
        TruthSpec::Random { main_sd, int_sd, zero_fraction } => {
            if !(0.0..=1.0).contains(zero_fraction) {
                return Err(Error::InvalidArgument("zero fraction must lie in [0, 1]".into()));
            }
            let main = Normal::new(0.0, *main_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let int = Normal::new(0.0, *int_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for b in &mut beta[1..1 + p] {
                *b = main.sample(&mut rng);
            }
            for b in &mut beta[1 + p..] {
                *b = int.sample(&mut rng);
            }
            let mut order: Vec<usize> = (0..q).collect();
            order.shuffle(&mut rng);
            let n_zero = (zero_fraction * q as f64).round() as usize;
            for &r in &order[..n_zero] {
                beta[1 + p + r] = 0.0;
            }
        }
        TruthSpec::Linked { n_strong, main_strong, main_weak, int_strong } => {
            let mut strong = vec![false; p];
            for cov in map.covariates().iter().filter(|c| !c.name.starts_with("noise")).take(*n_strong) {
                for c in cov.columns() {
                    strong[c] = true;
                }
            }
            let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
            for j in 0..p {
                beta[1 + j] = sign() * if strong[j] { *main_strong } else { *main_weak };
            }
            for (r, &(j, k)) in map.interaction_index().iter().enumerate() {
                if strong[j] && strong[k] {
                    beta[1 + p + r] = sign() * int_strong;
                }
            }
        }
    }
    beta[0] = cfg.intercept;
    for (b, &is_noise) in beta.iter_mut().zip(&noise) {
        if is_noise {
            *b = 0.0;
        }
    }
    Ok(beta)
}

/// Index sets of the training subsets. Blocks are disjoint when
/// `n_train · n_sets ≤ n_master`; otherwise each block is filled from rows
/// not yet used before reusing rows, never repeating a row within a block.
pub fn split_training_sets(n_master: usize, n_train: usize, n_sets: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_train == 0 || n_sets == 0 {
        return Err(Error::InvalidArgument("training size and count must be positive".into()));
    }
    if n_train > n_master {
        return Err(Error::InvalidArgument(format!("training size {n_train} exceeds master size {n_master}")));
    }
    let mut rng = stream(seed, 3);
    let mut perm: Vec<usize> = (0..n_master).collect();
    perm.shuffle(&mut rng);
    let mut sets = Vec::with_capacity(n_sets);
    let mut next = 0;
    for _ in 0..n_sets {
        let fresh = (n_master - next).min(n_train);
        let mut block: Vec<usize> = perm[next..next + fresh].to_vec();
        next += fresh;
        if block.len() < n_train {
            // Remainder exhausted: top up with distinct previously used rows.
            let mut used: Vec<usize> = perm[..next - fresh].to_vec();
            used.shuffle(&mut rng);
            block.extend(used.into_iter().take(n_train - block.len()));
        }
        sets.push(block);
    }
    Ok(sets)
}
