//! Measured rate versus prediction over grids of parameters and sizes.

use serde::{Deserialize, Serialize, Serializer};

use super::predict::{predicted_rate, PredictionMode};
use super::rate::{eps_coding_rate, exact_rate_distribution, monte_carlo_rate, RateConvention};
use crate::dictionary::{Dictionary, TcBuilder};
use crate::error::{Error, Result};
use crate::models::ExpFamilyModel;
use crate::qtypes::Grid;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one task, a function of the master seed and the task's grid
/// coordinates only.
pub fn task_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(master), |acc, &c| mix(acc ^ mix(c)))
}

/// How each point is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub exact: bool,
    pub mc_trials: Option<u64>,
    pub seed: u64,
    pub convention: RateConvention,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            exact: true,
            mc_trials: None,
            seed: 0,
            convention: RateConvention::TargetSize,
        }
    }
}

fn join_theta<S: Serializer>(theta: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let text: Vec<String> = theta.iter().map(f64::to_string).collect();
    s.serialize_str(&text.join(";"))
}

fn split_theta<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let text = String::deserialize(d)?;
    text.split(';')
        .map(|t| t.parse::<f64>().map_err(serde::de::Error::custom))
        .collect()
}

/// One evaluated `(model, theta, M, eps)` point; the field order is the CSV
/// column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model_id: String,
    #[serde(serialize_with = "join_theta", deserialize_with = "split_theta")]
    pub theta: Vec<f64>,
    #[serde(rename = "M")]
    pub m: u64,
    pub eps: f64,
    pub gamma: Option<f64>,
    pub dict_size: u64,
    pub exact_rate: Option<f64>,
    pub mc_rate: Option<f64>,
    pub ci: Option<f64>,
    pub predicted_first: f64,
    pub predicted_second: f64,
    pub predicted_third: f64,
    /// Measured rate minus the first two terms.
    pub residual: f64,
    /// `residual * log2 M / log2 log2 M`, comparable with `H d / 2`.
    pub residual_scaled: f64,
}

impl SweepRow {
    /// Measured rate minus all three predicted terms.
    pub fn beyond_third_order(&self) -> f64 {
        self.residual - self.predicted_third
    }
}

/// `log2 M / log2 log2 M`.
pub fn residual_scale(log2_m: f64) -> f64 {
    log2_m / log2_m.log2()
}

/// Evaluates one dictionary at one source parameter and tolerance.
pub fn evaluate_point(
    dict: &Dictionary,
    model_id: &str,
    theta: &[f64],
    eps: f64,
    opts: &EvalOptions,
) -> Result<SweepRow> {
    if !opts.exact && opts.mc_trials.is_none() {
        return Err(Error::InvalidArgument("neither exact nor Monte Carlo evaluation requested".into()));
    }
    let model = dict.model();
    model.param(theta)?;
    let dist = exact_rate_distribution(dict, theta, opts.convention);
    let exact = if opts.exact { Some(eps_coding_rate(&dist, eps)?) } else { None };
    let mc = match opts.mc_trials {
        Some(trials) => Some(monte_carlo_rate(dict, theta, eps, trials, opts.seed, opts.convention)?.0),
        None => None,
    };
    let (entropy, varentropy) = model.entropy_varentropy(theta);
    let pred = predicted_rate(
        entropy,
        varentropy.sqrt(),
        model.stat_dim(),
        dist.log2_m,
        eps,
        PredictionMode::Formula,
    )?;
    let measured = exact.as_ref().or(mc.as_ref()).expect("one mode requested").rate;
    let residual = measured - pred.first - pred.second;
    Ok(SweepRow {
        model_id: model_id.to_string(),
        theta: theta.to_vec(),
        m: dict.m_target(),
        eps,
        gamma: dict.gamma(),
        dict_size: dict.size() as u64,
        exact_rate: exact.as_ref().map(|e| e.rate),
        mc_rate: mc.as_ref().map(|e| e.rate),
        ci: mc.as_ref().and_then(|e| e.ci_halfwidth),
        predicted_first: pred.first,
        predicted_second: pred.second,
        predicted_third: pred.third,
        residual,
        residual_scaled: residual * residual_scale(dist.log2_m),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupResidualReport {
    pub rows: Vec<SweepRow>,
    /// Largest `residual_scaled` over the grid for each `(M, eps)`, in row order.
    pub sup_scaled: Vec<(u64, f64, f64)>,
}

/// Builds one TC dictionary per `M` and evaluates it at every `theta` and
/// `eps`. Rows are ordered by `(theta, M, eps)` indices.
pub fn sup_residual(
    model_id: &str,
    model: &ExpFamilyModel,
    grid: &Grid,
    thetas: &[Vec<f64>],
    ms: &[u64],
    epss: &[f64],
    opts: &EvalOptions,
) -> Result<SupResidualReport> {
    if thetas.is_empty() || ms.is_empty() || epss.is_empty() {
        return Err(Error::InvalidArgument("theta, M and eps lists must be nonempty".into()));
    }
    let mut builder = TcBuilder::new(model, grid)?;
    let dicts = ms
        .iter()
        .map(|&m| builder.choose_gamma(m).map(|c| c.dictionary))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(thetas.len() * ms.len() * epss.len());
    for (ti, theta) in thetas.iter().enumerate() {
        for (mi, dict) in dicts.iter().enumerate() {
            for (ei, &eps) in epss.iter().enumerate() {
                let point_opts = EvalOptions {
                    seed: task_seed(opts.seed, &[ti as u64, mi as u64, ei as u64]),
                    ..opts.clone()
                };
                rows.push(evaluate_point(dict, model_id, theta, eps, &point_opts)?);
            }
        }
    }
    let mut sup_scaled = Vec::new();
    for &m in ms {
        for &eps in epss {
            let sup = rows
                .iter()
                .filter(|r| r.m == m && r.eps == eps)
                .map(|r| r.residual_scaled)
                .fold(f64::NEG_INFINITY, f64::max);
            sup_scaled.push((m, eps, sup));
        }
    }
    Ok(SupResidualReport { rows, sup_scaled })
}

/// `points` equispaced interior points of `[lo, hi]`.
pub fn interior_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
        .collect()
}
