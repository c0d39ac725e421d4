//! Personalized unit-change effects and Shapley-based global importance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::design::{Encoding, FeatureMap};
use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::shapley::{Attribution, ShapleyResult};
use crate::summary::{summarize, Summary};

/// Posterior of `E_ij = β_j + Σ_k β_jk x_ik` for each individual `i`.
#[derive(Debug, Clone)]
pub struct UnitEffect {
    pub covariate: String,
    pub effects: Vec<Summary>,
}

/// Resolve a non-categorical covariate name to its design column.
pub fn effect_column(map: &FeatureMap, covariate: &str) -> Result<usize> {
    let g = map
        .covariate_index(covariate)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown covariate `{covariate}`")))?;
    let cov = &map.covariates()[g];
    if let Encoding::Categorical { .. } = cov.encoding {
        return Err(Error::InvalidArgument(format!(
            "`{covariate}` is categorical; a unit change is undefined, use Shapley values instead"
        )));
    }
    Ok(cov.first_column)
}

/// Per-individual unit-change effect of `covariate` on the rows of `x_main`
/// (standardized main-effect values).
pub fn unit_effect_posterior(
    draws: &PosteriorDraws,
    x_main: &DMatrix<f64>,
    covariate: &str,
    level: f64,
) -> Result<UnitEffect> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let map = draws.feature_map();
    if x_main.ncols() != map.p_columns() {
        return Err(Error::Shape(format!("{} columns for p={}", x_main.ncols(), map.p_columns())));
    }
    let j = effect_column(map, covariate)?;
    let links = map.links(j);
    let mut values = vec![0.0; draws.len()];
    let effects = (0..x_main.nrows())
        .map(|i| {
            for (v, s) in values.iter_mut().zip(draws.states()) {
                let mut e = s.beta_main[j];
                for l in links {
                    e += s.beta_int[l.interaction] * x_main[(i, l.partner)];
                }
                *v = e;
            }
            summarize(&values, level)
        })
        .collect::<Result<_>>()?;
    Ok(UnitEffect { covariate: covariate.to_string(), effects })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub covariate: String,
    pub importance: f64,
    pub importance_main: f64,
    pub importance_int: f64,
}

/// Global importance per covariate. In general `I ≠ I_main + I_int`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalImportance {
    pub rows: Vec<ImportanceRow>,
}

/// `I_c = (1/n) Σ_i |φ_ic|` on posterior-mean attributions, or on per-draw
/// attributions (`per_draw`, averaging `|φ|` over draws first).
pub fn global_importance(result: &ShapleyResult, per_draw: bool) -> Result<GlobalImportance> {
    let n = result.n_individuals;
    if n == 0 {
        return Err(Error::InvalidArgument("global importance needs at least one individual".into()));
    }
    let k = result.n_covariates();
    let rows = (0..k)
        .map(|c| {
            let avg = |f: &dyn Fn(usize) -> f64| (0..n).map(|i| f(result.cell(i, c))).sum::<f64>() / n as f64;
            let (i, im, ii) = if per_draw {
                (avg(&|x| result.abs_phi[x]), avg(&|x| result.abs_main[x]), avg(&|x| result.abs_int[x]))
            } else {
                (
                    avg(&|x| result.phi[x].mean.abs()),
                    avg(&|x| result.main[x].mean.abs()),
                    avg(&|x| result.int[x].mean.abs()),
                )
            };
            ImportanceRow { covariate: result.covariates[c].clone(), importance: i, importance_main: im, importance_int: ii }
        })
        .collect();
    Ok(GlobalImportance { rows })
}

/// Global importance from one set of (point) attributions.
pub fn global_importance_point(att: &Attribution, covariates: &[String]) -> Result<GlobalImportance> {
    let n = att.phi.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("global importance needs at least one individual".into()));
    }
    if att.phi.ncols() != covariates.len() {
        return Err(Error::Shape(format!("{} attribution columns for {} names", att.phi.ncols(), covariates.len())));
    }
    let mean_abs = |m: &DMatrix<f64>, c: usize| m.column(c).iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let rows = covariates
        .iter()
        .enumerate()
        .map(|(c, name)| ImportanceRow {
            covariate: name.clone(),
            importance: mean_abs(&att.phi, c),
            importance_main: mean_abs(&att.main, c),
            importance_int: mean_abs(&att.int, c),
        })
        .collect();
    Ok(GlobalImportance { rows })
}
