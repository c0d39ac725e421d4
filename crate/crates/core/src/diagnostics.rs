//! Convergence diagnostics: rank-normalized split-R̂ and bulk ESS.
//!
//! * Chains are split in half (the middle draw of an odd-length chain is
//!   dropped).
//! * Draws are pooled and replaced by normal scores of their average ranks,
//!   `Φ⁻¹((r − 3/8) / (S + 1/4))`.
//! * R̂ is the larger of the split-R̂ of the rank-normalized draws and of the
//!   rank-normalized folded draws `|θ − median|`.
//! * Bulk ESS uses the multi-chain autocorrelation estimate with Geyer's
//!   initial monotone sequence on the rank-normalized split chains.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::sampler::PosteriorDraws;
use crate::slice::SliceCounters;
use crate::special::quantile_sorted;

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub names: Vec<String>,
    /// `None` when fewer than two chains are available.
    pub rhat: Option<Vec<f64>>,
    pub ess: Vec<f64>,
    pub slice: SliceCounters,
    pub warnings: Vec<String>,
}

pub fn compute_diagnostics(draws: &PosteriorDraws) -> Diagnostics {
    let names = draws.param_names();
    let multi = draws.n_chains() >= 2;
    let mut warnings = Vec::new();
    if !multi {
        warnings.push("single chain: split-R̂ omitted".to_string());
    }
    let mut rhat = Vec::with_capacity(names.len());
    let mut ess = Vec::with_capacity(names.len());
    for i in 0..names.len() {
        let chains = draws.chains_of(i);
        if multi {
            rhat.push(rank_normalized_rhat(&chains));
        }
        ess.push(ess_bulk(&chains));
    }
    let mut slice = SliceCounters::default();
    for c in draws.slice_counters() {
        slice.merge(c);
    }
    Diagnostics { names, rhat: multi.then_some(rhat), ess, slice, warnings }
}

fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    out
}

/// Normal scores of pooled average ranks, reshaped like the input.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // average 1-based rank of the tie block
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &pooled[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

/// Classic split-R̂ on already-split chains.
fn rhat_of_split(split: &[Vec<f64>]) -> f64 {
    let m = split.len() as f64;
    let n = split[0].len() as f64;
    if split.len() < 2 || n < 2.0 {
        return f64::NAN;
    }
    let means: Vec<f64> = split.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|v| (v - grand).powi(2)).sum::<f64>();
    let w = split
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return f64::NAN;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Split-R̂ without rank normalization.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    rhat_of_split(&split_chains(chains))
}

/// Rank-normalized split-R̂: max of the bulk and folded versions.
pub fn rank_normalized_rhat(chains: &[Vec<f64>]) -> f64 {
    let split = split_chains(chains);
    if split.is_empty() || split[0].len() < 2 {
        return f64::NAN;
    }
    let bulk = rhat_of_split(&rank_normalize(&split));
    let mut pooled: Vec<f64> = split.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let median = quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - median).abs()).collect()).collect();
    let tail = rhat_of_split(&rank_normalize(&folded));
    match (bulk.is_nan(), tail.is_nan()) {
        (true, true) => f64::NAN,
        (false, true) => bulk,
        (true, false) => tail,
        _ => bulk.max(tail),
    }
}

/// Bulk effective sample size.
pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    let split = split_chains(chains);
    if split.is_empty() || split[0].len() < 4 {
        return f64::NAN;
    }
    let total = (split.len() * split[0].len()) as f64;
    let constant = split.iter().flatten().all(|&v| v == split[0][0]);
    if constant {
        return total;
    }
    ess_raw(&rank_normalize(&split))
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let acov = |c: usize, lag: usize| -> f64 {
        let x = &chains[c];
        let mu = means[c];
        (0..n - lag).map(|i| (x[i] - mu) * (x[i + lag] - mu)).sum::<f64>() / nf
    };
    let acov0: Vec<f64> = (0..m).map(|c| acov(c, 0)).collect();
    let mean_var = acov0.iter().sum::<f64>() / m as f64 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let grand = means.iter().sum::<f64>() / m as f64;
        var_plus += means.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    }
    let rho = |lag: usize| -> f64 {
        let mean_acov = (0..m).map(|c| acov(c, lag)).sum::<f64>() / m as f64;
        1.0 - (mean_var - mean_acov) / var_plus
    };

    // Geyer: sum consecutive pairs while positive, enforcing monotonicity.
    let mut sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let r0 = if lag == 0 { 1.0 } else { rho(lag) };
        let r1 = rho(lag + 1);
        let mut pair = r0 + r1;
        if pair < 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        sum += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / ((m * n) as f64).log10().max(1.0));
    let total = (m * n) as f64;
    (total / tau).min(total * total.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_parameter_gives_full_ess_and_nan_rhat() {
        let chains = vec![vec![1.0; 100], vec![1.0; 100]];
        assert_eq!(ess_bulk(&chains), 200.0);
        assert!(rank_normalized_rhat(&chains).is_nan() || rank_normalized_rhat(&chains) >= 1.0);
    }

    #[test]
    fn rank_normalization_is_monotone() {
        let chains = vec![vec![3.0, 1.0, 2.0], vec![10.0, -5.0, 2.0]];
        let z = rank_normalize(&chains);
        assert!(z[1][1] < z[0][1] && z[0][1] < z[0][0] && z[0][0] < z[1][0]);
        // ties share a score
        assert_eq!(z[0][2], z[1][2]);
    }
}
