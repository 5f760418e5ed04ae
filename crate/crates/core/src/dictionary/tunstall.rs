//! Tunstall's construction for a known source.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{Dictionary, DictionaryKind, DictionaryMeta, ParseTree};
use crate::error::{Error, Result};
use crate::models::{ExpFamilyModel, ParamVector, Sequence};

struct Leaf {
    log_prob: f64,
    counts: Vec<u32>,
    segment: Sequence,
}

impl PartialEq for Leaf {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Leaf {}

impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Leaf {
    // Max-heap order: more probable first, then lexicographically smaller.
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_prob
            .total_cmp(&other.log_prob)
            .then_with(|| Reverse(&self.segment).cmp(&Reverse(&other.segment)))
    }
}

fn log_prob(counts: &[u32], letter_log_probs: &[f64]) -> f64 {
    // Summed from counts so that equal compositions tie exactly.
    counts
        .iter()
        .zip(letter_log_probs)
        .map(|(&c, &lp)| f64::from(c) * lp)
        .sum()
}

/// Splits the most probable leaf while the result still fits in `m` segments;
/// ties go to the lexicographically smallest leaf.
pub fn build_tunstall(model: &ExpFamilyModel, theta: &ParamVector, m: u64) -> Result<Dictionary> {
    let k = model.alphabet_size();
    if m < k as u64 {
        return Err(Error::DictionaryTooSmall {
            size: m,
            alphabet_size: k,
        });
    }
    let lp = model.letter_log_probs(theta);
    let mut heap = BinaryHeap::new();
    for letter in 0..k {
        let mut counts = vec![0u32; k];
        counts[letter] += 1;
        heap.push(Leaf {
            log_prob: log_prob(&counts, &lp),
            counts,
            segment: Sequence::new(vec![letter as u8]),
        });
    }
    while heap.len() as u64 + (k as u64 - 1) <= m {
        let top = heap.pop().expect("heap is nonempty");
        for letter in 0..k {
            let mut counts = top.counts.clone();
            counts[letter] += 1;
            heap.push(Leaf {
                log_prob: log_prob(&counts, &lp),
                counts,
                segment: top.segment.extended(letter as u8),
            });
        }
    }
    let segments: Vec<Sequence> = heap.into_iter().map(|l| l.segment).collect();
    let tree = ParseTree::from_segments(k, &segments)?;
    let meta = DictionaryMeta {
        theta: Some(theta.to_vec()),
        ..DictionaryMeta::default()
    };
    Dictionary::new(DictionaryKind::Tunstall, model.clone(), tree, m, meta)
}
