//! From a variable-to-fixed code to a fixed-to-variable prefix code on `X^n`.
//!
//! The dictionary tree is cut at depth `n`. An input `x^n` that reaches a
//! leaf at depth `t` is sent as that leaf's index in `base_width` bits
//! followed by the remaining `n - t` letters at `ceil(log2 k)` bits each. Only
//! the length function is needed for the analysis, so codewords are formed
//! on request.

use crate::dictionary::{ceil_log2, Dictionary, NodeId, ParseTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::models::Sequence;

/// Inputs beyond which equivalence checks sample instead of enumerating.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// Implicit fixed-to-variable code.
#[derive(Clone, Debug)]
pub struct FvCode {
    pruned: ParseTree,
    n: usize,
    base_width: u32,
    base_width_ideal: f64,
    suffix_bits: u32,
}

/// Cuts `dict` at depth `n`; the base index uses `ceil(log2 M_target)` bits.
pub fn vf_to_fv(dict: &Dictionary, n: usize) -> Result<FvCode> {
    if n == 0 {
        return Err(Error::InvalidArgument("input length n must be at least 1".into()));
    }
    let pruned = dict.tree().prune(n);
    let m = dict.m_target();
    Ok(FvCode {
        base_width: ceil_log2(m),
        base_width_ideal: (m as f64).log2(),
        suffix_bits: ceil_log2(dict.tree().alphabet_size() as u64),
        n,
        pruned,
    })
}

impl FvCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pruned_tree(&self) -> &ParseTree {
        &self.pruned
    }

    /// Bits of the fixed base index, `ceil(log2 M)`.
    pub fn base_width(&self) -> u32 {
        self.base_width
    }

    /// `log2 M` without rounding.
    pub fn base_width_ideal(&self) -> f64 {
        self.base_width_ideal
    }

    pub fn suffix_bits(&self) -> u32 {
        self.suffix_bits
    }

    fn check_input(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "input has length {}, code expects {}",
                x.len(),
                self.n
            )));
        }
        let k = self.pruned.alphabet_size();
        if let Some(&bad) = x.iter().find(|&&a| usize::from(a) >= k) {
            return Err(Error::InvalidLetter {
                letter: bad.into(),
                alphabet_size: k,
            });
        }
        Ok(())
    }

    fn leaf_of(&self, x: &[u8]) -> NodeId {
        let mut node = TreeBuilder::ROOT;
        let mut pos = 0;
        while !self.pruned.is_leaf(node) {
            node = self.pruned.child(node, x[pos]).expect("internal node has children");
            pos += 1;
        }
        node
    }

    /// Depth of the pruned-tree leaf that `x^n` reaches.
    pub fn parse_depth(&self, x: &[u8]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.pruned.depth(self.leaf_of(x)))
    }

    /// `base_width + (n - depth) * ceil(log2 k)`.
    pub fn fv_length(&self, x: &[u8]) -> Result<u64> {
        let depth = self.parse_depth(x)?;
        Ok(u64::from(self.base_width) + ((self.n - depth) as u64) * u64::from(self.suffix_bits))
    }

    /// The codeword of `x^n` as a bit string.
    pub fn codeword(&self, x: &[u8]) -> Result<String> {
        self.check_input(x)?;
        let leaf = self.leaf_of(x);
        let rank = self.pruned.leaf_rank(leaf).expect("parse ends at a leaf") as u64;
        let mut bits = String::new();
        push_bits(&mut bits, rank, self.base_width);
        for &letter in &x[self.pruned.depth(leaf)..] {
            push_bits(&mut bits, u64::from(letter), self.suffix_bits);
        }
        Ok(bits)
    }
}

fn push_bits(out: &mut String, value: u64, width: u32) {
    for bit in (0..width).rev() {
        out.push(if value >> bit & 1 == 1 { '1' } else { '0' });
    }
}

/// Outcome of comparing the short-segment and long-codeword events.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub n: usize,
    pub base_width: u32,
    pub exhaustive: bool,
    pub inputs_checked: u64,
    pub counterexamples: Vec<Sequence>,
    /// `P(l_VF < n)` summed over dictionary leaves.
    pub p_short_segment: f64,
    /// `P(l_FV > base_width)` summed over pruned-tree leaves.
    pub p_long_codeword: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty() && (self.p_short_segment - self.p_long_codeword).abs() <= 1e-12
    }
}

/// Parse depth of `x` in `tree`, or `None` if no leaf is reached within `x`.
fn vf_depth(tree: &ParseTree, x: &[u8]) -> Option<usize> {
    let mut node = TreeBuilder::ROOT;
    for (pos, &letter) in x.iter().enumerate() {
        node = tree.child(node, letter)?;
        if tree.is_leaf(node) {
            return Some(pos + 1);
        }
    }
    None
}

/// Checks `[l_VF(x^n ...) < n] <=> [l_FV(x^n) > base_width]` on every
/// `x^n` (or on `samples` random streams when `k^n` is too large) and the
/// equality of the two event probabilities under `theta`.
pub fn check_event_equivalence(
    dict: &Dictionary,
    n: usize,
    base_width: u32,
    theta: &[f64],
    samples: u64,
    seed: u64,
) -> Result<EquivalenceReport> {
    let mut code = vf_to_fv(dict, n)?;
    code.base_width = base_width;
    let tree = dict.tree();
    let k = tree.alphabet_size();
    let model = dict.model();
    let letter_lp = model.letter_log_probs(theta);

    let mut counterexamples = Vec::new();
    let mut check = |x: &[u8]| -> Result<()> {
        let short = vf_depth(tree, x).is_some_and(|t| t < n);
        let long = code.fv_length(x)? > u64::from(base_width);
        if short != long && counterexamples.len() < 16 {
            counterexamples.push(Sequence::from(x));
        }
        Ok(())
    };

    let total = (k as u64).checked_pow(n as u32).filter(|&t| t <= EXHAUSTIVE_LIMIT);
    let (exhaustive, inputs_checked) = match total {
        Some(total) => {
            let mut x = vec![0u8; n];
            for _ in 0..total {
                check(&x)?;
                // Odometer increment.
                for pos in (0..n).rev() {
                    x[pos] += 1;
                    if usize::from(x[pos]) < k {
                        break;
                    }
                    x[pos] = 0;
                }
            }
            (true, total)
        }
        None => {
            let mut sampler = model.letter_sampler(theta, seed);
            for _ in 0..samples {
                let x: Vec<u8> = sampler.by_ref().take(n).collect();
                check(&x)?;
            }
            (false, samples)
        }
    };

    let leaf_mass = |t: &ParseTree| -> f64 {
        t.leaves()
            .iter()
            .filter(|&&l| t.depth(l) < n)
            .map(|&l| {
                let counts = t.path_counts(l);
                counts
                    .iter()
                    .zip(&letter_lp)
                    .map(|(&c, &lp)| c as f64 * lp)
                    .sum::<f64>()
                    .exp2()
            })
            .sum()
    };
    Ok(EquivalenceReport {
        n,
        base_width,
        exhaustive,
        inputs_checked,
        counterexamples,
        p_short_segment: leaf_mass(tree),
        p_long_codeword: leaf_mass(code.pruned_tree()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bernoulli_theta, ExpFamilyModel};

    fn tunstall_example() -> Dictionary {
        let model = ExpFamilyModel::bernoulli();
        let segs: Vec<Sequence> = [&[0u8, 0][..], &[0, 1], &[1]].iter().map(|s| Sequence::from(*s)).collect();
        Dictionary::from_segments(&model, &segs, 3).unwrap()
    }

    #[test]
    fn hand_example() {
        let d = tunstall_example();
        let code = vf_to_fv(&d, 2).unwrap();
        assert_eq!(code.base_width(), 2);
        assert_eq!(code.suffix_bits(), 1);
        assert_eq!(code.fv_length(&[0, 0]).unwrap(), 2);
        assert_eq!(code.fv_length(&[0, 1]).unwrap(), 2);
        assert_eq!(code.fv_length(&[1, 0]).unwrap(), 3);
        assert_eq!(code.fv_length(&[1, 1]).unwrap(), 3);
        assert_eq!(code.codeword(&[1, 1]).unwrap(), "101");
        assert!(code.fv_length(&[0]).is_err());

        let theta = [bernoulli_theta(0.3)];
        let report = check_event_equivalence(&d, 2, 2, &theta, 0, 0).unwrap();
        assert!(report.passed());
        assert_eq!(report.inputs_checked, 4);
        assert!((report.p_short_segment - 0.3).abs() < 1e-12);
    }

    #[test]
    fn long_segments_never_overflow() {
        let model = ExpFamilyModel::bernoulli();
        let d = Dictionary::new(
            crate::dictionary::DictionaryKind::Custom,
            model,
            ParseTree::full(2, 4),
            16,
            Default::default(),
        )
        .unwrap();
        for n in 1..=4 {
            let code = vf_to_fv(&d, n).unwrap();
            assert_eq!(code.pruned_tree().leaf_count(), 1 << n);
            let report = check_event_equivalence(&d, n, 4, &[0.5], 0, 0).unwrap();
            assert!(report.passed());
            assert_eq!(report.p_short_segment, 0.0);
        }
    }

    #[test]
    fn sampled_mode_for_large_inputs() {
        let model = ExpFamilyModel::quaternary();
        let d = Dictionary::single_letters(&model, 4).unwrap();
        let report = check_event_equivalence(&d, 13, 2, &[0.1, -0.2], 500, 9).unwrap();
        assert!(!report.exhaustive);
        assert_eq!(report.inputs_checked, 500);
        assert!(report.passed());
        assert!((report.p_short_segment - 1.0).abs() < 1e-12);
    }
}
