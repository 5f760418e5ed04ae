//! Third-order asymptotic prediction of the epsilon-coding rate.

use serde::{Deserialize, Serialize};

use super::gaussian::gaussian_quantile;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    Formula,
    /// Fixed point of the implicit inequality with slack constant `c`.
    Iterative { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterativeSolution {
    pub rate: f64,
    pub iterations: usize,
    /// `|iterative - formula| * log2 M`.
    pub scaled_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub entropy: f64,
    pub sigma: f64,
    pub stat_dim: usize,
    pub log2_m: f64,
    pub epsilon: f64,
    /// `H`.
    pub first: f64,
    /// `sigma sqrt(H / log2 M) Q^{-1}(eps)`.
    pub second: f64,
    /// `H (d/2) log2 log2 M / log2 M`.
    pub third: f64,
    pub total: f64,
    pub iterative: Option<IterativeSolution>,
}

const MAX_ITERATIONS: usize = 100_000;

/// Prediction for `M = 2^log2_m` codewords.
pub fn predicted_rate(
    entropy: f64,
    sigma: f64,
    stat_dim: usize,
    log2_m: f64,
    eps: f64,
    mode: PredictionMode,
) -> Result<AsymptoticPrediction> {
    if !(entropy > 0.0) || !(sigma >= 0.0) || !(log2_m >= 2.0) || !log2_m.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prediction needs H > 0, sigma >= 0, M >= 4 (got H={entropy}, sigma={sigma}, log2 M={log2_m})"
        )));
    }
    let q = gaussian_quantile(eps)?;
    let loglog_ratio = log2_m.log2() / log2_m;
    let half_d = stat_dim as f64 / 2.0;
    let first = entropy;
    let second = sigma * (entropy / log2_m).sqrt() * q;
    let third = entropy * half_d * loglog_ratio;
    let total = first + second + third;

    let iterative = match mode {
        PredictionMode::Formula => None,
        PredictionMode::Iterative { c } => {
            let step = |r: f64| entropy + sigma * (r / log2_m).sqrt() * q + r * half_d * loglog_ratio + c / log2_m;
            let mut r = entropy;
            let mut iterations = 0;
            loop {
                let next = step(r);
                iterations += 1;
                if !next.is_finite() || next <= 0.0 || iterations > MAX_ITERATIONS {
                    return Err(Error::Divergence(format!(
                        "fixed point failed after {iterations} iterations at log2 M = {log2_m}"
                    )));
                }
                let done = (next - r).abs() <= 1e-12 * next.max(1.0);
                r = next;
                if done {
                    break;
                }
            }
            Some(IterativeSolution {
                rate: r,
                iterations,
                scaled_gap: (r - total).abs() * log2_m,
            })
        }
    };

    Ok(AsymptoticPrediction {
        entropy,
        sigma,
        stat_dim,
        log2_m,
        epsilon: eps,
        first,
        second,
        third,
        total,
        iterative,
    })
}
