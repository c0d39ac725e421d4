//! Posterior summaries: mean, sd and equal-tailed credible intervals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::PosteriorDraws;
use crate::special::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Summary {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// True when the interval lies strictly on one side of zero.
    pub fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

/// Summarize a sample with an equal-tailed interval at `level`.
pub fn summarize(values: &[f64], level: f64) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyDraws);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("credible level {level} must lie in (0, 1)")));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok(Summary { mean, sd, lower: quantile_sorted(&sorted, tail), upper: quantile_sorted(&sorted, 1.0 - tail) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Per-parameter summaries in [`PosteriorDraws::param_names`] order.
pub fn posterior_summary(draws: &PosteriorDraws, level: f64) -> Result<Vec<ParamSummary>> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    draws
        .param_names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| Ok(ParamSummary { name, summary: summarize(&draws.param_values(i), level)? }))
        .collect()
}
