//! Law of the first segment length and the epsilon-coding rate it induces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dictionary::{ceil_log2, Dictionary};
use crate::error::{Error, Result};

/// Which `log2 M` the rate `log2 M / l` uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `log2 M_target`, rounding ignored.
    #[default]
    TargetSize,
    /// `ceil(log2 |D|)`, the bits actually spent per segment.
    CodewordWidth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    Exact,
    MonteCarlo,
}

/// Probability of each first-segment length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDistribution {
    pub entries: BTreeMap<usize, f64>,
    pub m_for_rate: u64,
    pub log2_m: f64,
}

/// Neumaier compensated sum.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn rate_log2_m(dict: &Dictionary, convention: RateConvention) -> (u64, f64) {
    match convention {
        RateConvention::TargetSize => (dict.m_target(), (dict.m_target() as f64).log2()),
        RateConvention::CodewordWidth => {
            let w = dict.codeword_width();
            (1u64 << w, f64::from(w))
        }
    }
}

/// Sums `p_theta(x*)` over segments of each length.
pub fn exact_rate_distribution(
    dict: &Dictionary,
    theta: &[f64],
    convention: RateConvention,
) -> RateDistribution {
    let tree = dict.tree();
    let mut sums: BTreeMap<usize, Kahan> = BTreeMap::new();
    for (lp, &leaf) in dict.leaf_log_probs(theta).iter().zip(tree.leaves()) {
        sums.entry(tree.depth(leaf)).or_default().add(lp.exp2());
    }
    let (m_for_rate, log2_m) = rate_log2_m(dict, convention);
    RateDistribution {
        entries: sums.into_iter().map(|(l, s)| (l, s.value())).collect(),
        m_for_rate,
        log2_m,
    }
}

impl RateDistribution {
    /// Empirical distribution of observed lengths.
    pub fn from_lengths(lengths: &[usize], m_for_rate: u64, log2_m: f64) -> Self {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for &l in lengths {
            *counts.entry(l).or_default() += 1;
        }
        let n = lengths.len() as f64;
        RateDistribution {
            entries: counts.into_iter().map(|(l, c)| (l, c as f64 / n)).collect(),
            m_for_rate,
            log2_m,
        }
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = Kahan::default();
        self.entries.values().for_each(|&p| acc.add(p));
        acc.value()
    }

    pub fn rate_of_length(&self, length: usize) -> f64 {
        self.log2_m / length as f64
    }

    /// `P(log2 M / l >= rate)`, i.e. the mass of lengths `l <= log2 M / rate`.
    pub fn overflow_probability(&self, rate: f64) -> f64 {
        let mut acc = Kahan::default();
        for (&l, &p) in &self.entries {
            if self.rate_of_length(l) >= rate {
                acc.add(p);
            }
        }
        acc.value()
    }

    pub fn mean_length(&self) -> f64 {
        self.entries.iter().map(|(&l, &p)| l as f64 * p).sum()
    }

    /// Shortest length `l` with `P(L <= l) > eps`, and whether none exists.
    fn critical_length(&self, eps: f64) -> Option<usize> {
        let mut acc = Kahan::default();
        for (&l, &p) in &self.entries {
            acc.add(p);
            if acc.value() > eps {
                return Some(l);
            }
        }
        None
    }
}

/// Epsilon-coding rate with an optional confidence band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub epsilon: f64,
    pub rate: f64,
    pub attained: bool,
    pub mode: RateMode,
    pub ci_halfwidth: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Shortest length whose rate is overflowed with probability above `eps`.
    pub critical_length: Option<usize>,
    pub trials: Option<u64>,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

fn step_rate(dist: &RateDistribution, eps: f64) -> Result<(f64, bool, Option<usize>)> {
    if dist.entries.is_empty() {
        return Err(Error::InvalidArgument("empty rate distribution".into()));
    }
    Ok(match dist.critical_length(eps) {
        Some(l) => (dist.rate_of_length(l), false, Some(l)),
        // Numerically deficient mass: every rate is feasible down to the smallest.
        None => {
            let longest = *dist.entries.keys().next_back().expect("nonempty");
            (dist.rate_of_length(longest), true, None)
        }
    })
}

/// `inf { R : P(log2 M / l >= R) <= eps }` from the exact step function.
pub fn eps_coding_rate(dist: &RateDistribution, eps: f64) -> Result<RateEstimate> {
    check_eps(eps)?;
    let (rate, attained, critical_length) = step_rate(dist, eps)?;
    Ok(RateEstimate {
        epsilon: eps,
        rate,
        attained,
        mode: RateMode::Exact,
        ci_halfwidth: None,
        ci_low: None,
        ci_high: None,
        critical_length,
        trials: None,
    })
}

/// Two-sided 99% normal quantile used for the binomial band.
const CI_Z: f64 = 2.5758293035489004;

/// Rate from `trials` consecutive segments of one sampled stream.
///
/// Segments of an i.i.d. stream are i.i.d., so the empirical length law
/// estimates the one-shot law. The interval maps the binomial band
/// `eps +- z sqrt(eps (1 - eps) / N)` through the empirical step function.
pub fn monte_carlo_rate(
    dict: &Dictionary,
    theta: &[f64],
    eps: f64,
    trials: u64,
    seed: u64,
    convention: RateConvention,
) -> Result<(RateEstimate, RateDistribution)> {
    check_eps(eps)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut stream = dict.model().letter_sampler(theta, seed);
    let mut lengths = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        lengths.push(dict.parse_one(&mut stream)?.length);
    }
    let (m_for_rate, log2_m) = rate_log2_m(dict, convention);
    let dist = RateDistribution::from_lengths(&lengths, m_for_rate, log2_m);
    let (rate, attained, critical_length) = step_rate(&dist, eps)?;
    let delta = CI_Z * (eps * (1.0 - eps) / trials as f64).sqrt();
    let lower_eps = (eps - delta).max(f64::MIN_POSITIVE);
    let upper_eps = (eps + delta).min(1.0 - f64::EPSILON);
    let ci_high = step_rate(&dist, lower_eps)?.0;
    let ci_low = step_rate(&dist, upper_eps)?.0;
    Ok((
        RateEstimate {
            epsilon: eps,
            rate,
            attained,
            mode: RateMode::MonteCarlo,
            ci_halfwidth: Some((ci_high - rate).max(rate - ci_low)),
            ci_low: Some(ci_low),
            ci_high: Some(ci_high),
            critical_length,
            trials: Some(trials),
        },
        dist,
    ))
}

impl RateEstimate {
    /// Whether `value` lies inside the reported interval (exact estimates
    /// contain only their own rate).
    pub fn covers(&self, value: f64) -> bool {
        match (self.ci_low, self.ci_high) {
            (Some(lo), Some(hi)) => value >= lo - 1e-12 && value <= hi + 1e-12,
            _ => (value - self.rate).abs() <= 1e-12,
        }
    }
}

/// `ceil(log2 |D|)` as a float, for callers reporting implementable rates.
pub fn codeword_bits(dict: &Dictionary) -> f64 {
    f64::from(ceil_log2(dict.size() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bernoulli_theta, ExpFamilyModel, Sequence};

    fn tunstall_example() -> Dictionary {
        let model = ExpFamilyModel::bernoulli();
        let segs: Vec<Sequence> = [&[0u8, 0][..], &[0, 1], &[1]].iter().map(|s| Sequence::from(*s)).collect();
        Dictionary::from_segments(&model, &segs, 3).unwrap()
    }

    #[test]
    fn tunstall_hand_example() {
        let d = tunstall_example();
        let theta = [bernoulli_theta(0.3)];
        let dist = exact_rate_distribution(&d, &theta, RateConvention::TargetSize);
        assert!((dist.entries[&2] - 0.7).abs() < 1e-12);
        assert!((dist.entries[&1] - 0.3).abs() < 1e-12);
        let est = eps_coding_rate(&dist, 0.2).unwrap();
        assert!((est.rate - 3f64.log2()).abs() < 1e-12);
        assert!(!est.attained);
        let est = eps_coding_rate(&dist, 0.3).unwrap();
        assert!((est.rate - 3f64.log2() / 2.0).abs() < 1e-12);
        assert!(eps_coding_rate(&dist, 0.0).is_err());
        assert!(eps_coding_rate(&dist, 1.0).is_err());
    }

    #[test]
    fn single_letters_and_convention() {
        let model = ExpFamilyModel::ternary();
        let d = Dictionary::single_letters(&model, 3).unwrap();
        let dist = exact_rate_distribution(&d, &[0.4], RateConvention::TargetSize);
        assert_eq!(dist.entries.len(), 1);
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        for eps in [0.01, 0.5, 0.99] {
            assert!((eps_coding_rate(&dist, eps).unwrap().rate - 3f64.log2()).abs() < 1e-12);
        }
        let dist = exact_rate_distribution(&d, &[0.4], RateConvention::CodewordWidth);
        assert_eq!(dist.log2_m, 2.0);
    }

    #[test]
    fn overflow_identity() {
        let d = tunstall_example();
        let dist = exact_rate_distribution(&d, &[0.3], RateConvention::TargetSize);
        for &l in dist.entries.keys() {
            let r = dist.rate_of_length(l);
            let longer: f64 = dist.entries.iter().filter(|(&m, _)| m as f64 > dist.log2_m / r).map(|(_, p)| p).sum();
            assert!((dist.overflow_probability(r) - (1.0 - longer)).abs() < 1e-15);
        }
    }

    #[test]
    fn monte_carlo_matches_hand_example() {
        let d = tunstall_example();
        let theta = [bernoulli_theta(0.3)];
        let (est, dist) = monte_carlo_rate(&d, &theta, 0.2, 100_000, 5, RateConvention::TargetSize).unwrap();
        assert_eq!(est.mode, RateMode::MonteCarlo);
        assert!((dist.entries[&1] - 0.3).abs() < 4.0 * (0.21f64 / 1e5).sqrt());
        assert!(est.covers(3f64.log2()));
        let (again, _) = monte_carlo_rate(&d, &theta, 0.2, 100_000, 5, RateConvention::TargetSize).unwrap();
        assert_eq!(est, again);
    }
}
