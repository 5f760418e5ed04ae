//! Distance between the normalized information `-log2 p(X^l)` and a Gaussian.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use super::gaussian::gaussian_tail;
use crate::error::{Error, Result};
use crate::models::{letter_counts, ExpFamilyModel};
use crate::qtypes::{composition_count, for_each_composition};

pub const DEFAULT_Z_GRID_POINTS: usize = 601;
/// Compositions beyond which `Auto` falls back to sampling.
const EXACT_COMPOSITION_LIMIT: u128 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalityMethod {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
    /// Exact when the composition count is small enough.
    Auto { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub length: usize,
    pub deviation: f64,
    /// `deviation * sqrt(l)`.
    pub scaled: f64,
    pub argmax_z: f64,
    pub exact: bool,
}

/// Equispaced grid of `points` values on `[-alpha, alpha]`.
pub fn z_grid(alpha: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| -alpha + 2.0 * alpha * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `sup_z |P((I - l H) / (sigma sqrt l) > z) - Q(z)|` over `z_grid`, where
/// `I = -log2 p_theta(X^l)`. An empty grid means the default `[-3, 3]` grid.
pub fn normality_deviation(
    model: &ExpFamilyModel,
    theta: &[f64],
    length: usize,
    z_values: &[f64],
    method: NormalityMethod,
) -> Result<NormalityReport> {
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    let (entropy, varentropy) = model.entropy_varentropy(theta);
    if varentropy < 1e-12 {
        return Err(Error::Degenerate(
            "zero varentropy: the information is constant and has no normal limit".into(),
        ));
    }
    let default_grid;
    let z_values = if z_values.is_empty() {
        default_grid = z_grid(3.0, DEFAULT_Z_GRID_POINTS);
        &default_grid
    } else {
        z_values
    };
    let k = model.alphabet_size();
    let info = model.letter_log_probs(theta).iter().map(|lp| -lp).collect::<Vec<_>>();
    let ln_probs = model.letter_probs(theta).iter().map(|p| p.ln()).collect::<Vec<_>>();
    let scale = (varentropy * length as f64).sqrt();
    let centre = length as f64 * entropy;
    let normalized = |counts: &[u64]| -> f64 {
        let total: f64 = counts.iter().zip(&info).map(|(&c, &i)| c as f64 * i).sum();
        (total - centre) / scale
    };

    let exact = match method {
        NormalityMethod::Exact => true,
        NormalityMethod::MonteCarlo { .. } => false,
        NormalityMethod::Auto { .. } => composition_count(length, k) <= EXACT_COMPOSITION_LIMIT,
    };
    // Atoms (value, mass) of the normalized information.
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    if exact {
        let ln_l = ln_factorial(length as u64);
        for_each_composition(k, length as u64, |counts| {
            let ln_mass: f64 = ln_l
                + counts
                    .iter()
                    .zip(&ln_probs)
                    .map(|(&c, &lp)| if c == 0 { 0.0 } else { c as f64 * lp - ln_factorial(c) })
                    .sum::<f64>();
            atoms.push((normalized(counts), ln_mass.exp()));
        });
    } else {
        let (trials, seed) = match method {
            NormalityMethod::MonteCarlo { trials, seed } | NormalityMethod::Auto { trials, seed } => (trials, seed),
            NormalityMethod::Exact => unreachable!(),
        };
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let mut sampler = model.letter_sampler(theta, seed);
        let weight = 1.0 / trials as f64;
        for _ in 0..trials {
            let block: Vec<u8> = sampler.by_ref().take(length).collect();
            atoms.push((normalized(&letter_counts(&block, k)), weight));
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Tail masses from the top: suffix[i] = mass of atoms[i..].
    let mut suffix = vec![0.0; atoms.len() + 1];
    for i in (0..atoms.len()).rev() {
        suffix[i] = suffix[i + 1] + atoms[i].1;
    }
    let mut deviation = 0.0f64;
    let mut argmax_z = z_values.first().copied().unwrap_or(0.0);
    for &z in z_values {
        let first_above = atoms.partition_point(|a| a.0 <= z);
        let gap = (suffix[first_above] - gaussian_tail(z)).abs();
        if gap > deviation {
            deviation = gap;
            argmax_z = z;
        }
    }
    Ok(NormalityReport {
        length,
        deviation,
        scaled: deviation * (length as f64).sqrt(),
        argmax_z,
        exact,
    })
}
