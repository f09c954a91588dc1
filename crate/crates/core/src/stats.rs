//! Monte Carlo summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Sample mean of i.i.d. trials with its standard error and 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub half_width: f64,
    pub trials: usize,
}

impl McEstimate {
    /// Summarizes per-trial values. Summation is pairwise over the slice in
    /// its given order, so the result does not depend on how the values were
    /// produced (e.g. thread count).
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                half_width: f64::NAN,
                trials: 0,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let std_error = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            half_width: Z_95 * std_error,
            trials: n,
        }
    }

    /// A deterministic value reported in the same shape.
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            half_width: 0.0,
            trials: 0,
        }
    }

    /// Adds a constant offset (e.g. an MMSE floor) to the estimate.
    pub fn shifted(self, offset: f64) -> Self {
        Self {
            mean: self.mean + offset,
            ..self
        }
    }
}

/// Runs `trials` independent trials in parallel, returning their outputs in
/// trial order.
pub fn run_trials<T, F>(trials: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if trials == 0 {
        return Err(Error::invalid("at least one Monte Carlo trial is required"));
    }
    (0..trials as u64).into_par_iter().map(&trial).collect()
}

/// [`run_trials`] followed by a summary of the scalar outputs.
pub fn monte_carlo<F>(trials: usize, trial: F) -> Result<McEstimate>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    Ok(McEstimate::from_samples(&run_trials(trials, trial)?))
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
