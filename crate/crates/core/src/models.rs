//! Exponential-family sources over a finite alphabet.
//!
//! A model assigns each letter `x` a statistic vector `tau(x)` in `R^d` and
//! defines, for a natural parameter `theta`,
//!
//! ```text
//! p_theta(x) = 2^(<theta, tau(x)> - psi(theta)),   psi(theta) = log2 sum_x 2^<theta, tau(x)>
//! ```
//!
//! Letter statistics are kept as exact rationals so that quantization
//! boundaries can be decided exactly; probabilities are `f64`. All logarithms
//! are base 2.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Iteration cap of the maximum-likelihood solver.
pub const MLE_MAX_ITERATIONS: usize = 200;
/// Projected-gradient tolerance of the maximum-likelihood solver.
pub const MLE_GRADIENT_TOLERANCE: f64 = 1e-10;

/// A finite string of letters `0..k`.
///
/// The derived ordering is lexicographic with a proper prefix sorting before
/// its extensions, which is the segment order used by dictionaries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<u8>);

impl Sequence {
    pub fn new(letters: Vec<u8>) -> Self {
        Sequence(letters)
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, letter: u8) {
        self.0.push(letter);
    }

    /// The sequence with one more letter appended.
    pub fn extended(&self, letter: u8) -> Sequence {
        let mut letters = self.0.clone();
        letters.push(letter);
        Sequence(letters)
    }

    pub fn is_prefix_of(&self, other: &[u8]) -> bool {
        other.len() >= self.0.len() && other[..self.0.len()] == self.0[..]
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl Deref for Sequence {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Sequence {
    fn from(letters: Vec<u8>) -> Self {
        Sequence(letters)
    }
}

impl From<&[u8]> for Sequence {
    fn from(letters: &[u8]) -> Self {
        Sequence(letters.to_vec())
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, letter) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{letter}")?;
        }
        Ok(())
    }
}

/// A natural parameter that lies inside the model's parameter box.
///
/// Only [`ExpFamilyModel::param`] constructs these, clamping into the box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// On-disk model description.
///
/// `tau` holds one row per letter, each a list of `d` rational strings such as
/// `"3/4"`; `theta_box` holds `d` pairs `[lo, hi]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabet_size: usize,
    pub stat_dim: usize,
    pub tau: Vec<Vec<String>>,
    pub theta_box: Vec<[f64; 2]>,
}

/// A minimal exponential family over a finite alphabet with a compact box of
/// natural parameters.
#[derive(Clone, Debug)]
pub struct ExpFamilyModel {
    name: String,
    tau: Vec<Vec<BigRational>>,
    tau_f64: Vec<Vec<f64>>,
    theta_box: Vec<(f64, f64)>,
    p_min: f64,
    p_max: f64,
}

impl PartialEq for ExpFamilyModel {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.tau == other.tau && self.theta_box == other.theta_box
    }
}

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let (numer, denom) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let numer = BigInt::from_str(numer)
        .map_err(|_| Error::InvalidModel(format!("bad rational numerator in {text:?}")))?;
    let denom = BigInt::from_str(denom)
        .map_err(|_| Error::InvalidModel(format!("bad rational denominator in {text:?}")))?;
    if denom.is_zero() {
        return Err(Error::InvalidModel(format!("zero denominator in {text:?}")));
    }
    Ok(BigRational::new(numer, denom))
}

/// Canonical `"p/q"` text of a rational (always with an explicit denominator).
pub fn format_rational(value: &BigRational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub(crate) fn rational_to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        let n = value.numer().to_f64().unwrap_or(f64::NAN);
        let d = value.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Natural parameter of the Bernoulli model giving probability `p1` to letter 1.
pub fn bernoulli_theta(p1: f64) -> f64 {
    (p1 / (1.0 - p1)).log2()
}

impl ExpFamilyModel {
    /// Builds and validates a model.
    pub fn new(
        name: impl Into<String>,
        tau: Vec<Vec<BigRational>>,
        theta_box: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let k = tau.len();
        if k < 2 {
            return Err(Error::InvalidModel("alphabet needs at least two letters".into()));
        }
        if k > usize::from(u8::MAX) + 1 {
            return Err(Error::InvalidModel(format!("alphabet of {k} letters is too large")));
        }
        let d = theta_box.len();
        if d == 0 {
            return Err(Error::InvalidModel("statistic dimension must be positive".into()));
        }
        if let Some(row) = tau.iter().position(|row| row.len() != d) {
            return Err(Error::InvalidModel(format!(
                "letter {row} has {} statistics, expected {d}",
                tau[row].len()
            )));
        }
        for (i, &(lo, hi)) in theta_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidModel(format!(
                    "theta_box[{i}] = [{lo}, {hi}] is not a bounded nonempty interval"
                )));
            }
        }
        if affine_rank(&tau) != d {
            return Err(Error::InvalidModel(format!(
                "letter statistics do not affinely span R^{d}; the parameterization is not minimal"
            )));
        }
        let tau_f64 = tau
            .iter()
            .map(|row| row.iter().map(rational_to_f64).collect())
            .collect();
        let mut model = ExpFamilyModel {
            name: name.into(),
            tau,
            tau_f64,
            theta_box,
            p_min: 0.0,
            p_max: 1.0,
        };
        model.p_min = model.corner_min_probability();
        if !(model.p_min > 0.0) {
            return Err(Error::InvalidModel(
                "some letter has zero probability on the parameter box".into(),
            ));
        }
        model.p_max = model.compute_p_max()?;
        if !(model.p_max < 1.0) {
            return Err(Error::InvalidModel(
                "some letter has probability one on the parameter box".into(),
            ));
        }
        Ok(model)
    }

    /// Bernoulli source: `tau = (0), (1)`, `theta` in `[-3, 3]` (so `1/9 <= p <= 8/9`).
    pub fn bernoulli() -> Self {
        Self::from_integer_table("bernoulli", &[&[0], &[1]], &[(-3.0, 3.0)])
    }

    /// One-parameter family on three letters with `tau = (0), (1), (3)`.
    pub fn ternary() -> Self {
        Self::from_integer_table("ternary", &[&[0], &[1], &[3]], &[(-1.5, 1.5)])
    }

    /// Two-parameter family on four letters with `tau` at the corners of the unit square.
    pub fn quaternary() -> Self {
        Self::from_integer_table(
            "quaternary",
            &[&[0, 0], &[1, 0], &[0, 1], &[1, 1]],
            &[(-2.0, 2.0), (-2.0, 2.0)],
        )
    }

    /// Looks up a bundled model by name.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "bernoulli" => Some(Self::bernoulli()),
            "ternary" => Some(Self::ternary()),
            "quaternary" => Some(Self::quaternary()),
            _ => None,
        }
    }

    fn from_integer_table(name: &str, tau: &[&[i64]], theta_box: &[(f64, f64)]) -> Self {
        let tau = tau
            .iter()
            .map(|row| row.iter().map(|&v| BigRational::from_integer(v.into())).collect())
            .collect();
        Self::new(name, tau, theta_box.to_vec()).expect("bundled model is valid")
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.tau.len() != file.alphabet_size {
            return Err(Error::InvalidModel(format!(
                "alphabet_size is {} but tau has {} rows",
                file.alphabet_size,
                file.tau.len()
            )));
        }
        if file.theta_box.len() != file.stat_dim {
            return Err(Error::InvalidModel(format!(
                "stat_dim is {} but theta_box has {} entries",
                file.stat_dim,
                file.theta_box.len()
            )));
        }
        let tau = file
            .tau
            .iter()
            .map(|row| row.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let theta_box = file.theta_box.iter().map(|&[lo, hi]| (lo, hi)).collect();
        Self::new(file.name.clone().unwrap_or_else(|| "custom".into()), tau, theta_box)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            name: Some(self.name.clone()),
            alphabet_size: self.alphabet_size(),
            stat_dim: self.stat_dim(),
            tau: self
                .tau
                .iter()
                .map(|row| row.iter().map(format_rational).collect())
                .collect(),
            theta_box: self.theta_box.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    /// Single-line canonical JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet_size(&self) -> usize {
        self.tau.len()
    }

    pub fn stat_dim(&self) -> usize {
        self.theta_box.len()
    }

    pub fn tau(&self, letter: usize) -> &[BigRational] {
        &self.tau[letter]
    }

    pub fn tau_f64(&self, letter: usize) -> &[f64] {
        &self.tau_f64[letter]
    }

    pub fn theta_box(&self) -> &[(f64, f64)] {
        &self.theta_box
    }

    /// Smallest letter probability over the parameter box.
    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    /// Largest letter probability over the parameter box.
    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Clamps `theta` into the parameter box.
    pub fn param(&self, theta: &[f64]) -> Result<ParamVector> {
        if theta.len() != self.stat_dim() {
            return Err(Error::InvalidArgument(format!(
                "parameter has {} components, model has {}",
                theta.len(),
                self.stat_dim()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {theta:?} is not finite")));
        }
        Ok(ParamVector(self.clamp(theta)))
    }

    /// The center of the parameter box.
    pub fn box_center(&self) -> ParamVector {
        ParamVector(self.theta_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect())
    }

    fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.theta_box)
            .map(|(&t, &(lo, hi))| t.clamp(lo, hi))
            .collect()
    }

    pub fn check_letter(&self, letter: u8) -> Result<()> {
        if usize::from(letter) < self.alphabet_size() {
            Ok(())
        } else {
            Err(Error::InvalidLetter {
                letter: letter.into(),
                alphabet_size: self.alphabet_size(),
            })
        }
    }

    pub fn check_sequence(&self, seq: &[u8]) -> Result<()> {
        seq.iter().try_for_each(|&x| self.check_letter(x))
    }

    fn exponents(&self, theta: &[f64]) -> Vec<f64> {
        self.tau_f64.iter().map(|t| dot(theta, t)).collect()
    }

    /// `psi(theta) = log2 sum_x 2^<theta, tau(x)>`.
    pub fn log_partition(&self, theta: &[f64]) -> f64 {
        log2_sum_exp2(&self.exponents(theta))
    }

    /// `log2 p_theta(x)` for every letter.
    pub fn letter_log_probs(&self, theta: &[f64]) -> Vec<f64> {
        let exps = self.exponents(theta);
        let psi = log2_sum_exp2(&exps);
        exps.into_iter().map(|e| e - psi).collect()
    }

    pub fn letter_probs(&self, theta: &[f64]) -> Vec<f64> {
        self.letter_log_probs(theta).into_iter().map(f64::exp2).collect()
    }

    /// `log2 p_theta(x^l) = l (<theta, tau(x^l)> - psi(theta))`.
    pub fn sequence_log_prob(&self, theta: &[f64], seq: &[u8]) -> Result<f64> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_sequence(seq)?;
        let len = seq.len() as f64;
        let avg = self.suff_stat_avg_f64(seq);
        Ok(len * (dot(theta, &avg) - self.log_partition(theta)))
    }

    /// Exact average statistic `tau(x^l) = (1/l) sum_i tau(x_i)`.
    pub fn suff_stat_avg(&self, seq: &[u8]) -> Result<Vec<BigRational>> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_sequence(seq)?;
        let mut sum = vec![BigRational::zero(); self.stat_dim()];
        for &x in seq {
            for (acc, t) in sum.iter_mut().zip(&self.tau[usize::from(x)]) {
                *acc += t;
            }
        }
        let len = BigRational::from_integer(seq.len().into());
        Ok(sum.into_iter().map(|s| s / &len).collect())
    }

    /// Floating-point average statistic, computed from letter counts.
    pub fn suff_stat_avg_f64(&self, seq: &[u8]) -> Vec<f64> {
        let counts = letter_counts(seq, self.alphabet_size());
        self.stat_avg_from_counts(&counts)
    }

    pub(crate) fn stat_avg_from_counts(&self, counts: &[u64]) -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        let mut avg = vec![0.0; self.stat_dim()];
        for (&c, t) in counts.iter().zip(&self.tau_f64) {
            if c > 0 {
                for (a, &v) in avg.iter_mut().zip(t) {
                    *a += c as f64 * v;
                }
            }
        }
        avg.iter_mut().for_each(|a| *a /= total as f64);
        avg
    }

    /// `E_theta[tau(X)]`, which equals the gradient of `psi`.
    pub fn mean_stat(&self, theta: &[f64]) -> Vec<f64> {
        let probs = self.letter_probs(theta);
        let mut mean = vec![0.0; self.stat_dim()];
        for (p, t) in probs.iter().zip(&self.tau_f64) {
            for (m, &v) in mean.iter_mut().zip(t) {
                *m += p * v;
            }
        }
        mean
    }

    /// `Cov_theta(tau(X))`; the Hessian of `psi` is `ln 2` times this matrix.
    pub fn stat_covariance(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let d = self.stat_dim();
        let probs = self.letter_probs(theta);
        let mean = self.mean_stat(theta);
        let mut cov = vec![vec![0.0; d]; d];
        for (p, t) in probs.iter().zip(&self.tau_f64) {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += p * (t[i] - mean[i]) * (t[j] - mean[j]);
                }
            }
        }
        cov
    }

    /// Entropy and varentropy (bits, bits squared) of `p_theta`.
    pub fn entropy_varentropy(&self, theta: &[f64]) -> (f64, f64) {
        let log_probs = self.letter_log_probs(theta);
        let entropy: f64 = log_probs.iter().map(|&lp| -lp * lp.exp2()).sum();
        let varentropy: f64 = log_probs
            .iter()
            .map(|&lp| {
                let dev = -lp - entropy;
                lp.exp2() * dev * dev
            })
            .sum();
        (entropy, varentropy.max(0.0))
    }

    /// Whether `tau` lies in the convex hull of the letter statistics.
    pub fn hull_contains(&self, tau: &[f64]) -> bool {
        const TOL: f64 = 1e-12;
        let d = self.stat_dim();
        if tau.len() != d || tau.iter().any(|t| !t.is_finite()) {
            return false;
        }
        let scale = 1.0
            + self
                .tau_f64
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()));
        if d == 1 {
            let (lo, hi) = self
                .tau_f64
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                    (lo.min(t[0]), hi.max(t[0]))
                });
            return tau[0] >= lo - TOL * scale && tau[0] <= hi + TOL * scale;
        }
        // Caratheodory: some (d+1)-subset of the vertices holds tau in its simplex.
        let k = self.alphabet_size();
        let mut subset: Vec<usize> = (0..=d).collect();
        loop {
            if subset.len() <= k {
                if let Some(weights) = self.barycentric(&subset, tau) {
                    if weights.iter().all(|&w| w >= -TOL * scale) {
                        return true;
                    }
                }
            }
            if !next_subset(&mut subset, k) {
                return false;
            }
        }
    }

    fn barycentric(&self, subset: &[usize], tau: &[f64]) -> Option<Vec<f64>> {
        let d = self.stat_dim();
        let n = d + 1;
        let mut a = vec![vec![0.0; n + 1]; n];
        for (col, &x) in subset.iter().enumerate() {
            for row in 0..d {
                a[row][col] = self.tau_f64[x][row];
            }
            a[d][col] = 1.0;
        }
        for row in 0..d {
            a[row][n] = tau[row];
        }
        a[d][n] = 1.0;
        gaussian_solve(a)
    }

    /// Maximum-likelihood parameter for the average statistic `tau`:
    /// the maximizer of `<theta, tau> - psi(theta)` over the parameter box.
    ///
    /// Damped projected Newton; the objective is strictly concave because its
    /// Hessian is `-ln 2 * Cov_theta(tau(X))`.
    pub fn mle(&self, tau: &[f64]) -> Result<ParamVector> {
        if tau.len() != self.stat_dim() {
            return Err(Error::InvalidArgument(format!(
                "statistic has {} components, model has {}",
                tau.len(),
                self.stat_dim()
            )));
        }
        if !self.hull_contains(tau) {
            return Err(Error::OutsideHull(tau.to_vec()));
        }
        let d = self.stat_dim();
        let objective = |theta: &[f64]| dot(theta, tau) - self.log_partition(theta);
        let mut theta = self.clamp(&vec![0.0; d]);
        let mut value = objective(&theta);
        let mut last_gradient = f64::INFINITY;
        for _ in 0..MLE_MAX_ITERATIONS {
            let mean = self.mean_stat(&theta);
            let grad: Vec<f64> = tau.iter().zip(&mean).map(|(t, m)| t - m).collect();
            let free: Vec<usize> = (0..d)
                .filter(|&i| {
                    let (lo, hi) = self.theta_box[i];
                    !((theta[i] <= lo && grad[i] < 0.0) || (theta[i] >= hi && grad[i] > 0.0))
                })
                .collect();
            let pg = free.iter().fold(0.0f64, |m, &i| m.max(grad[i].abs()));
            last_gradient = pg;
            if pg <= MLE_GRADIENT_TOLERANCE {
                return Ok(ParamVector(theta));
            }
            let cov = self.stat_covariance(&theta);
            let mut system = vec![vec![0.0; free.len() + 1]; free.len()];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    system[r][c] = LN_2 * cov[i][j];
                }
                system[r][free.len()] = grad[i];
            }
            let mut direction = vec![0.0; d];
            match gaussian_solve(system) {
                Some(step) if step.iter().all(|s| s.is_finite()) => {
                    for (&i, s) in free.iter().zip(step) {
                        direction[i] = s;
                    }
                }
                _ => {
                    for &i in &free {
                        direction[i] = grad[i];
                    }
                }
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = self.clamp(
                    &theta
                        .iter()
                        .zip(&direction)
                        .map(|(t, s)| t + step * s)
                        .collect::<Vec<_>>(),
                );
                let trial_value = objective(&trial);
                let predicted: f64 = trial
                    .iter()
                    .zip(&theta)
                    .zip(&grad)
                    .map(|((a, b), g)| (a - b) * g)
                    .sum();
                // Near the optimum the increase drops below rounding of the objective.
                if trial_value >= value + 1e-4 * predicted || (pg < 1e-6 && step == 1.0) {
                    theta = trial;
                    value = trial_value;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::NoConvergence {
            iterations: MLE_MAX_ITERATIONS,
            gradient: last_gradient,
            theta,
        })
    }

    /// Maximum-likelihood code length `-log2 p_{theta_hat(x^l)}(x^l)` from letter counts.
    pub fn ml_codelength_counts(&self, counts: &[u64]) -> Result<f64> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptySequence);
        }
        let avg = self.stat_avg_from_counts(counts);
        let theta = self.mle(&avg)?;
        Ok(total as f64 * (self.log_partition(&theta) - dot(&theta, &avg)))
    }

    /// Maximum-likelihood code length of a sequence.
    pub fn ml_codelength(&self, seq: &[u8]) -> Result<f64> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        self.check_sequence(seq)?;
        self.ml_codelength_counts(&letter_counts(seq, self.alphabet_size()))
    }

    /// Lazily samples i.i.d. letters from `p_theta`.
    pub fn letter_sampler(&self, theta: &[f64], seed: u64) -> LetterSampler {
        LetterSampler::new(&self.letter_probs(theta), seed)
    }

    /// `length` i.i.d. letters from `p_theta`, a pure function of `(seed, length)`.
    pub fn sample_stream(&self, theta: &[f64], seed: u64, length: usize) -> Sequence {
        Sequence(self.letter_sampler(theta, seed).take(length).collect())
    }

    fn corner_min_probability(&self) -> f64 {
        let d = self.stat_dim();
        let mut min = 1.0f64;
        for mask in 0u64..(1u64 << d.min(20)) {
            let corner: Vec<f64> = self
                .theta_box
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| if mask >> i & 1 == 1 { hi } else { lo })
                .collect();
            for p in self.letter_probs(&corner) {
                min = min.min(p);
            }
        }
        min
    }

    fn compute_p_max(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for x in 0..self.alphabet_size() {
            let theta = self.mle(&self.tau_f64[x].clone())?;
            max = max.max(self.letter_probs(&theta)[x]);
        }
        Ok(max)
    }
}

/// Counts of each letter in `seq`.
pub fn letter_counts(seq: &[u8], alphabet_size: usize) -> Vec<u64> {
    let mut counts = vec![0u64; alphabet_size];
    for &x in seq {
        counts[usize::from(x)] += 1;
    }
    counts
}

/// Deterministic i.i.d. letter source driven by ChaCha8.
#[derive(Clone, Debug)]
pub struct LetterSampler {
    cumulative: Vec<f64>,
    rng: ChaCha8Rng,
}

impl LetterSampler {
    pub fn new(probs: &[f64], seed: u64) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        LetterSampler {
            cumulative,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Iterator for LetterSampler {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let u: f64 = self.rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1);
        Some(idx as u8)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log2 sum_i 2^{x_i}` without overflow.
pub fn log2_sum_exp2(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp2()).sum::<f64>().log2()
}

/// Solves the augmented system `[A | b]` by partial pivoting. `None` if singular.
fn gaussian_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|row| row[..n].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for c in col..=n {
                    a[row][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (a[row][n] - tail) / a[row][row];
    }
    Some(x)
}

fn next_subset(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Rank of `{tau(x) - tau(0)}` in exact arithmetic.
fn affine_rank(tau: &[Vec<BigRational>]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = tau[1..]
        .iter()
        .map(|row| row.iter().zip(&tau[0]).map(|(a, b)| a - b).collect())
        .collect();
    let cols = tau[0].len();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = &rows[r][col] / &rows[rank][col];
                for c in col..cols {
                    let delta = &factor * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}
