//! Univariate slice sampling (stepping-out followed by shrinkage).

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Evaluation counts accumulated over many slice updates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SliceCounters {
    pub updates: u64,
    pub evaluations: u64,
    pub expansions: u64,
    pub shrinks: u64,
}

impl SliceCounters {
    pub fn merge(&mut self, other: &SliceCounters) {
        self.updates += other.updates;
        self.evaluations += other.evaluations;
        self.expansions += other.expansions;
        self.shrinks += other.shrinks;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceError {
    /// The target is not finite at the current point.
    NonFiniteStart,
    /// The bracket collapsed onto the current point without acceptance.
    Collapsed,
}

/// One stepping-out + shrinkage update from `x0` with step `width` and at
/// most `max_steps` expansions in total.
pub fn slice_step<R: Rng + ?Sized>(
    rng: &mut R,
    x0: f64,
    log_f: impl Fn(f64) -> f64,
    width: f64,
    max_steps: usize,
    counters: &mut SliceCounters,
) -> Result<f64, SliceError> {
    counters.updates += 1;
    let f0 = log_f(x0);
    counters.evaluations += 1;
    if !f0.is_finite() {
        return Err(SliceError::NonFiniteStart);
    }
    let level = f0 - Distribution::<f64>::sample(&Exp1, rng);

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (max_steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = max_steps.saturating_sub(1).saturating_sub(j);
    while j > 0 {
        counters.evaluations += 1;
        if log_f(left) <= level {
            break;
        }
        counters.expansions += 1;
        left -= width;
        j -= 1;
    }
    while k > 0 {
        counters.evaluations += 1;
        if log_f(right) <= level {
            break;
        }
        counters.expansions += 1;
        right += width;
        k -= 1;
    }
    shrink(rng, x0, &log_f, level, left, right, counters)
}

/// Shrinkage-only update inside a fixed bracket `[left, right]`, used for
/// bounded parameters where the whole support is the initial interval.
pub fn slice_step_bounded<R: Rng + ?Sized>(
    rng: &mut R,
    x0: f64,
    log_f: impl Fn(f64) -> f64,
    left: f64,
    right: f64,
    counters: &mut SliceCounters,
) -> Result<f64, SliceError> {
    counters.updates += 1;
    let f0 = log_f(x0);
    counters.evaluations += 1;
    if !f0.is_finite() {
        return Err(SliceError::NonFiniteStart);
    }
    let level = f0 - Distribution::<f64>::sample(&Exp1, rng);
    shrink(rng, x0, &log_f, level, left, right, counters)
}

fn shrink<R: Rng + ?Sized>(
    rng: &mut R,
    x0: f64,
    log_f: &impl Fn(f64) -> f64,
    level: f64,
    mut left: f64,
    mut right: f64,
    counters: &mut SliceCounters,
) -> Result<f64, SliceError> {
    loop {
        let x1 = left + rng.random::<f64>() * (right - left);
        counters.evaluations += 1;
        if log_f(x1) > level {
            return Ok(x1);
        }
        counters.shrinks += 1;
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left <= 1e-14 * (1.0 + x0.abs()) {
            return Err(SliceError::Collapsed);
        }
    }
}
