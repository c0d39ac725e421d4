//! Evaluation protocols: rMSE against a master benchmark, detection by
//! credible interval or p-value, sensitivity/specificity curves, Shapley
//! interval coverage and in-bag/out-of-bag R².

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{interaction_moments, main_means, DesignMatrix, FeatureMap};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ModelState, Variant};
use crate::ols::{fit_ols, fit_ols_matrix, OlsFit};
use crate::sampler::{run_sampler, PosteriorDraws, SamplerConfig};
use crate::shapley::{shapley_categorical, shapley_fast, shapley_posterior, ShapleyQuery, ShapleyResult};
use crate::special::quantile_sorted;
use crate::synth::{generate_master, noise_coefficients, split_training_sets, SynthConfig};

/// Per-coefficient `sqrt(mean_b (β̂_b − β)²)`.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<Vec<f64>> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("rMSE needs at least one estimate".into()));
    }
    if let Some(bad) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::Shape(format!("estimate of length {} for {} coefficients", bad.len(), truth.len())));
    }
    let b = estimates.len() as f64;
    Ok((0..truth.len())
        .map(|j| (estimates.iter().map(|e| (e[j] - truth[j]).powi(2)).sum::<f64>() / b).sqrt())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum DetectionRule {
    /// Detected when the equal-tailed interval at this level excludes 0.
    Credible(f64),
    /// Detected when `p ≤ α`.
    PValue(f64),
}

/// What a detection rule is applied to.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    Draws(&'a PosteriorDraws),
    PValues(&'a [f64]),
}

/// Per-coefficient detection flags `[α, mains…, interactions…]`.
pub fn detect(evidence: Evidence<'_>, rule: DetectionRule) -> Result<Vec<bool>> {
    match (evidence, rule) {
        (Evidence::Draws(d), DetectionRule::Credible(level)) => {
            Ok(credible_detections(d, &[level])?.pop().unwrap_or_default())
        }
        (Evidence::PValues(p), DetectionRule::PValue(alpha)) => Ok(pvalue_detections(p, &[alpha]).remove(0)),
        _ => Err(Error::InvalidArgument("detection rule does not match the fit type".into())),
    }
}

/// Credible-interval detections for several levels, `[level][coefficient]`.
pub fn credible_detections(draws: &PosteriorDraws, levels: &[f64]) -> Result<Vec<Vec<bool>>> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::InvalidArgument(format!("credible level {l} must lie in (0, 1)")));
    }
    let d = 1 + draws.feature_map().p_columns() + draws.feature_map().q();
    let mut out = vec![Vec::with_capacity(d); levels.len()];
    for j in 0..d {
        let mut v = draws.param_values(j);
        v.sort_by(f64::total_cmp);
        for (li, &level) in levels.iter().enumerate() {
            let tail = 0.5 * (1.0 - level);
            let (lo, hi) = (quantile_sorted(&v, tail), quantile_sorted(&v, 1.0 - tail));
            out[li].push(lo > 0.0 || hi < 0.0);
        }
    }
    Ok(out)
}

/// `[α][coefficient]` flags `p ≤ α`.
pub fn pvalue_detections(p_values: &[f64], alphas: &[f64]) -> Vec<Vec<bool>> {
    alphas.iter().map(|&a| p_values.iter().map(|&p| p <= a).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
    Indeterminate,
}

/// Label the non-intercept coefficients from a master fit: positive when
/// `p ≤ 0.05 / (p + q)`, negative when the coefficient involves a noise
/// covariate or `p > 0.05`, indeterminate otherwise.
pub fn master_labels(master: &OlsFit, involves_noise: &[bool]) -> Result<Vec<Label>> {
    let d = master.p_values.len();
    if involves_noise.len() != d || d < 2 {
        return Err(Error::Shape(format!("{} noise flags for {d} coefficients", involves_noise.len())));
    }
    let strict = 0.05 / (d - 1) as f64;
    Ok((1..d)
        .map(|j| {
            let p = master.p_values[j];
            if involves_noise[j] || p > 0.05 {
                Label::Negative
            } else if p <= strict {
                Label::Positive
            } else {
                Label::Indeterminate
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub specificity: f64,
    pub sensitivity: f64,
}

/// Sensitivity and specificity per threshold, averaged over replicates.
/// `detections[t][b][j]` covers the labelled coefficients only.
pub fn roc_points(detections: &[Vec<Vec<bool>>], labels: &[Label], thresholds: &[f64]) -> Result<Vec<RocPoint>> {
    let n_pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    let n_neg = labels.iter().filter(|&&l| l == Label::Negative).count();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "ROC needs positives and negatives, got {n_pos} and {n_neg}"
        )));
    }
    if detections.len() != thresholds.len() {
        return Err(Error::Shape(format!("{} detection sets for {} thresholds", detections.len(), thresholds.len())));
    }
    detections
        .iter()
        .zip(thresholds)
        .map(|(reps, &threshold)| {
            if reps.is_empty() {
                return Err(Error::InvalidArgument("no replicates".into()));
            }
            let (mut sens, mut spec) = (0.0, 0.0);
            for det in reps {
                if det.len() != labels.len() {
                    return Err(Error::Shape(format!("{} detections for {} labels", det.len(), labels.len())));
                }
                let tp = det.iter().zip(labels).filter(|(&d, &l)| d && l == Label::Positive).count();
                let tn = det.iter().zip(labels).filter(|(&d, &l)| !d && l == Label::Negative).count();
                sens += tp as f64 / n_pos as f64;
                spec += tn as f64 / n_neg as f64;
            }
            let b = reps.len() as f64;
            Ok(RocPoint { threshold, specificity: spec / b, sensitivity: sens / b })
        })
        .collect()
}

/// `1 − Σ (y − ŷ)² / Σ (y − ȳ)²` with a supplied reference mean.
pub fn r_squared(y: &[f64], pred: &[f64], y_bar: f64) -> Result<f64> {
    if y.is_empty() || y.len() != pred.len() {
        return Err(Error::Shape(format!("{} responses, {} predictions", y.len(), pred.len())));
    }
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - y_bar).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::InvalidArgument("R² denominator is zero".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub covariate: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Per covariate: fraction of replicates whose interval covers the true φ
/// for each individual, then median and quartiles over individuals.
/// `true_phi` is `m × covariates`.
pub fn shapley_coverage(fits: &[ShapleyResult], true_phi: &DMatrix<f64>) -> Result<Vec<CoverageRow>> {
    let first = fits.first().ok_or_else(|| Error::InvalidArgument("coverage needs replicate fits".into()))?;
    let (m, k) = (first.n_individuals, first.n_covariates());
    if true_phi.shape() != (m, k) || fits.iter().any(|f| f.n_individuals != m || f.n_covariates() != k) {
        return Err(Error::Shape("replicate Shapley results and true values disagree in shape".into()));
    }
    let b = fits.len() as f64;
    Ok((0..k)
        .map(|c| {
            let mut rates: Vec<f64> = (0..m)
                .map(|i| fits.iter().filter(|f| f.phi_at(i, c).covers(true_phi[(i, c)])).count() as f64 / b)
                .collect();
            rates.sort_by(f64::total_cmp);
            CoverageRow {
                covariate: first.covariates[c].clone(),
                median: quantile_sorted(&rates, 0.5),
                q1: quantile_sorted(&rates, 0.25),
                q3: quantile_sorted(&rates, 0.75),
            }
        })
        .collect())
}

/// Coefficients `[α, mains…, interactions…]` and p-values of the two-step
/// procedure: a main-effects fit, then a refit with the significant
/// (`p < alpha`) main effects and the interactions among them. Excluded
/// coefficients are 0 with p-value 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepFit {
    pub coefficients: Vec<f64>,
    pub p_values: Vec<f64>,
}

pub fn two_step(x: &DesignMatrix, y: &[f64], alpha: f64) -> Result<TwoStepFit> {
    let map = x.feature_map();
    let (p, q) = (map.p_columns(), map.q());
    let names = map.coefficient_names();
    let first = fit_ols_matrix(&x.main_only(), y, names[..1 + p].to_vec())?;
    let keep: Vec<usize> = (0..p).filter(|&j| first.p_values[1 + j] < alpha).collect();
    let ints: Vec<usize> = map
        .interaction_index()
        .iter()
        .enumerate()
        .filter(|(_, (j, k))| keep.contains(j) && keep.contains(k))
        .map(|(r, _)| r)
        .collect();
    let cols: Vec<usize> = std::iter::once(0)
        .chain(keep.iter().map(|j| 1 + j))
        .chain(ints.iter().map(|r| 1 + p + r))
        .collect();
    let z = x.full().select_columns(&cols);
    let fit = fit_ols_matrix(&z, y, cols.iter().map(|&c| names[c].clone()).collect())?;
    let mut coefficients = vec![0.0; 1 + p + q];
    let mut p_values = vec![1.0; 1 + p + q];
    for (i, &c) in cols.iter().enumerate() {
        coefficients[c] = fit.coefficients[i];
        p_values[c] = fit.p_values[i];
    }
    Ok(TwoStepFit { coefficients, p_values })
}

/// A method compared by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Bayes(Variant),
    Ols,
    TwoStep,
}

impl Method {
    pub const NAMES: [&'static str; 7] = ["bayint", "bayintstar", "bayintadd", "bay0int", "bayloc", "ols", "twostep"];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bayes(v) => v.name(),
            Method::Ols => "ols",
            Method::TwoStep => "twostep",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "twostep" | "2step" => Ok(Method::TwoStep),
            other => other.parse().map(Method::Bayes).map_err(|_| {
                Error::InvalidArgument(format!("unknown method `{s}`; valid methods: {}", Method::NAMES.join(", ")))
            }),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub synth: SynthConfig,
    pub methods: Vec<Method>,
    pub sampler: SamplerConfig,
    /// Credible level / `1 − α` for detection and coverage.
    pub level: f64,
    /// Replicate fits used for detection frequencies and ROC curves.
    pub detection_subsets: usize,
    pub roc_levels: Vec<f64>,
    pub pvalue_grid: Vec<f64>,
    /// Test individuals for Shapley coverage (0 disables coverage).
    pub coverage_individuals: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            methods: vec![Method::Bayes(Variant::Bayint), Method::Ols],
            sampler: SamplerConfig::default(),
            level: 0.95,
            detection_subsets: 50,
            roc_levels: vec![0.80, 0.85, 0.90, 0.95, 0.99, 0.999],
            pvalue_grid: vec![0.001, 0.005, 0.01, 0.05, 0.1],
            coverage_individuals: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: String,
    /// Coefficient estimates per replicate.
    pub estimates: Vec<Vec<f64>>,
    pub rmse: Vec<f64>,
    /// Detection frequency per coefficient at the configured level.
    pub detection: Vec<f64>,
    pub roc: Vec<RocPoint>,
    pub coverage: Option<Vec<CoverageRow>>,
    /// `(in_bag, out_of_bag)` per replicate.
    pub r2: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub coefficient_names: Vec<String>,
    /// Generating coefficients.
    pub truth: Vec<f64>,
    /// Master-set least-squares estimates, the rMSE benchmark.
    pub benchmark: Vec<f64>,
    pub master_se: Vec<f64>,
    pub involves_noise: Vec<bool>,
    pub labels: Vec<Label>,
    pub methods: Vec<MethodReport>,
    /// R² of the main-effects-only least-squares baseline.
    pub maineff_r2: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// One CSV per table plus `summary.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("rmse.csv"))?;
        w.write_record(["method", "coefficient", "benchmark", "rmse"])?;
        for m in &self.methods {
            for (j, v) in m.rmse.iter().enumerate() {
                w.write_record([&m.method, &self.coefficient_names[j], &self.benchmark[j].to_string(), &v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("rmse.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("detection.csv"))?;
        w.write_record(["method", "coefficient", "label", "frequency"])?;
        for m in &self.methods {
            for (j, v) in m.detection.iter().enumerate() {
                let label = if j == 0 { "intercept".to_string() } else { label_name(self.labels[j - 1]).to_string() };
                w.write_record([&m.method, &self.coefficient_names[j], &label, &v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("detection.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("roc.csv"))?;
        w.write_record(["method", "threshold", "specificity", "sensitivity"])?;
        for m in &self.methods {
            for r in &m.roc {
                w.write_record([&m.method, &r.threshold.to_string(), &r.specificity.to_string(), &r.sensitivity.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("roc.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("coverage.csv"))?;
        w.write_record(["method", "covariate", "median", "q1", "q3"])?;
        for m in &self.methods {
            for r in m.coverage.iter().flatten() {
                w.write_record([&m.method, &r.covariate, &r.median.to_string(), &r.q1.to_string(), &r.q3.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("coverage.csv"), e))?;

        let mut w = csv::Writer::from_path(dir.join("r2.csv"))?;
        w.write_record(["method", "replicate", "in_bag", "out_of_bag"])?;
        let rows = self.methods.iter().map(|m| (m.method.as_str(), &m.r2)).chain([("maineff", &self.maineff_r2)]);
        for (name, r2) in rows {
            for (b, (i, o)) in r2.iter().enumerate() {
                w.write_record([name, &b.to_string(), &i.to_string(), &o.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("r2.csv"), e))?;

        let path = dir.join("summary.json");
        let json = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Nested summary: per method mean rMSE by block, mean R², ROC.
    pub fn summary(&self) -> serde_json::Value {
        let d = self.involves_noise.len();
        let n_main = self.coefficient_names.iter().skip(1).take_while(|n| !n.contains(':')).count();
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let methods: serde_json::Map<String, serde_json::Value> = self
            .methods
            .iter()
            .map(|m| {
                let r2_in: Vec<f64> = m.r2.iter().map(|r| r.0).collect();
                let r2_out: Vec<f64> = m.r2.iter().map(|r| r.1).collect();
                (
                    m.method.clone(),
                    serde_json::json!({
                        "replicates": m.estimates.len(),
                        "rmse": {
                            "main_mean": mean(&m.rmse[1..1 + n_main]),
                            "interaction_mean": mean(&m.rmse[1 + n_main..d]),
                        },
                        "r2": { "in_bag_mean": mean(&r2_in), "out_of_bag_mean": mean(&r2_out) },
                        "roc": m.roc,
                        "coverage": m.coverage,
                    }),
                )
            })
            .collect();
        let maineff_out: Vec<f64> = self.maineff_r2.iter().map(|r| r.1).collect();
        serde_json::json!({
            "coefficients": self.coefficient_names.len(),
            "labels": {
                "positive": self.labels.iter().filter(|&&l| l == Label::Positive).count(),
                "negative": self.labels.iter().filter(|&&l| l == Label::Negative).count(),
                "indeterminate": self.labels.iter().filter(|&&l| l == Label::Indeterminate).count(),
            },
            "methods": methods,
            "maineff": { "out_of_bag_mean": mean(&maineff_out) },
        })
    }
}

fn label_name(l: Label) -> &'static str {
    match l {
        Label::Positive => "positive",
        Label::Negative => "negative",
        Label::Indeterminate => "indeterminate",
    }
}

/// Fit one Bayesian variant on a training design.
pub fn fit_bayes(variant: Variant, x: &DesignMatrix, y: &[f64], cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    run_sampler(&ModelSpec::new(variant), x, y, cfg)
}

fn complement(n: usize, rows: &[usize]) -> Vec<usize> {
    let mut used = vec![false; n];
    for &r in rows {
        used[r] = true;
    }
    (0..n).filter(|&i| !used[i]).collect()
}

fn r2_pair(design: &DesignMatrix, y: &[f64], train: &[usize], oob: &[usize], predict: &dyn Fn(&DesignMatrix) -> Vec<f64>) -> Result<(f64, f64)> {
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_bar = y_train.iter().sum::<f64>() / y_train.len() as f64;
    let in_bag = r_squared(&y_train, &predict(&design.select_rows(train)), y_bar)?;
    let out = if oob.is_empty() {
        f64::NAN
    } else {
        let y_oob: Vec<f64> = oob.iter().map(|&i| y[i]).collect();
        r_squared(&y_oob, &predict(&design.select_rows(oob)), y_bar)?
    };
    Ok((in_bag, out))
}

/// Run the full protocol on a synthetic master set.
pub fn run_protocol(cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {} must lie in (0, 1)", cfg.level)));
    }
    let master = generate_master(&cfg.synth)?;
    let design = &master.design;
    let map: Arc<FeatureMap> = Arc::clone(design.feature_map());
    let y = master.data.response();
    let master_fit = fit_ols(design, y)?;
    let involves_noise = noise_coefficients(&map);
    let labels = master_labels(&master_fit, &involves_noise)?;
    let n_fits = cfg.synth.n_sets.max(cfg.detection_subsets);
    let splits = split_training_sets(cfg.synth.n_master, cfg.synth.n_train, n_fits, cfg.synth.seed)?;
    let n_det = cfg.detection_subsets.clamp(1, n_fits);
    let alpha = 1.0 - cfg.level;

    // Coverage test individuals and their true attributions.
    let coverage_setup = if cfg.coverage_individuals > 0 {
        let rows = split_training_sets(cfg.synth.n_master, cfg.coverage_individuals.min(cfg.synth.n_master), 1, cfg.synth.seed ^ 0x5eed)?.remove(0);
        let individuals = design.select_rows(&rows);
        let query = ShapleyQuery::new(
            individuals.x_main.clone(),
            main_means(design),
            interaction_moments(design)?,
            Arc::clone(&map),
        )?;
        let state = ModelState::from_coefficients(&master_fit.coefficients, map.p_columns());
        let truth = shapley_categorical(&shapley_fast(&state, &query)?, &map).phi;
        Some((query, truth))
    } else {
        None
    };

    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut estimates = Vec::with_capacity(n_fits);
        let mut det_level = Vec::with_capacity(n_det);
        let mut roc_det: Vec<Vec<Vec<bool>>> = Vec::new();
        let mut shap = Vec::new();
        let mut r2 = Vec::with_capacity(cfg.synth.n_sets);
        let thresholds = match method {
            Method::Bayes(_) => cfg.roc_levels.clone(),
            _ => cfg.pvalue_grid.clone(),
        };
        roc_det.resize(thresholds.len(), Vec::new());
        for (b, rows) in splits.iter().enumerate() {
            let train = design.select_rows(rows);
            let y_train: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let oob = complement(cfg.synth.n_master, rows);
            let (coefs, dets, level_det) = match method {
                Method::Bayes(v) => {
                    let mut sc = cfg.sampler.clone();
                    sc.seed = cfg.sampler.seed.wrapping_add(b as u64);
                    let draws = fit_bayes(v, &train, &y_train, &sc)?;
                    if b < cfg.synth.n_sets {
                        if let Some((query, _)) = &coverage_setup {
                            shap.push(shapley_posterior(&draws, query, cfg.level)?);
                        }
                    }
                    let dets = if b < n_det { credible_detections(&draws, &thresholds)? } else { vec![] };
                    let level_det = if b < n_det { credible_detections(&draws, &[cfg.level])?.remove(0) } else { vec![] };
                    (draws.coefficient_means(), dets, level_det)
                }
                Method::Ols => {
                    let fit = fit_ols(&train, &y_train)?;
                    let dets = pvalue_detections(&fit.p_values, &thresholds);
                    let level_det = pvalue_detections(&fit.p_values, &[alpha]).remove(0);
                    (fit.coefficients, dets, level_det)
                }
                Method::TwoStep => {
                    let fit = two_step(&train, &y_train, 0.05)?;
                    let dets = pvalue_detections(&fit.p_values, &thresholds);
                    let level_det = pvalue_detections(&fit.p_values, &[alpha]).remove(0);
                    (fit.coefficients, dets, level_det)
                }
            };
            if b < n_det {
                for (t, d) in dets.into_iter().enumerate() {
                    roc_det[t].push(d[1..].to_vec());
                }
                det_level.push(level_det);
            }
            if b < cfg.synth.n_sets {
                let c = coefs.clone();
                r2.push(r2_pair(design, y, rows, &oob, &|x: &DesignMatrix| x.predict(&c))?);
                estimates.push(coefs);
            }
        }
        let d = master_fit.coefficients.len();
        let detection = (0..d)
            .map(|j| det_level.iter().filter(|v| v[j]).count() as f64 / det_level.len() as f64)
            .collect();
        let coverage = match &coverage_setup {
            Some((_, truth)) if !shap.is_empty() => Some(shapley_coverage(&shap, truth)?),
            _ => None,
        };
        methods.push(MethodReport {
            method: method.name().to_string(),
            rmse: rmse(&estimates, &master_fit.coefficients)?,
            estimates,
            detection,
            roc: roc_points(&roc_det, &labels, &thresholds)?,
            coverage,
            r2,
        });
    }

    let mut maineff_r2 = Vec::with_capacity(cfg.synth.n_sets);
    let p = map.p_columns();
    let main_names: Vec<String> = map.coefficient_names()[..1 + p].to_vec();
    for rows in splits.iter().take(cfg.synth.n_sets) {
        let train = design.select_rows(rows);
        let y_train: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let fit = fit_ols_matrix(&train.main_only(), &y_train, main_names.clone())?;
        let oob = complement(cfg.synth.n_master, rows);
        maineff_r2.push(r2_pair(design, y, rows, &oob, &|x: &DesignMatrix| fit.predict(&x.main_only()))?);
    }

    Ok(EvalReport {
        coefficient_names: map.coefficient_names(),
        truth: master.truth.clone(),
        benchmark: master_fit.coefficients.clone(),
        master_se: master_fit.standard_errors.clone(),
        involves_noise,
        labels,
        methods,
        maineff_r2,
    })
}
