//! Parsing dictionaries: the TC rule, the Tunstall baseline, one-shot
//! parsing and a text file format.

mod format;
mod tc;
mod tree;
mod tunstall;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::models::{ExpFamilyModel, Sequence};
use crate::qtypes::Grid;

pub use format::{DictionaryHeader, FORMAT_VERSION};
pub use tc::{
    build_tc_dictionary, choose_gamma, gamma_reference, segment_length_cap, size_bound_chain,
    BuildStats, GammaChoice, LevelBoundRow, Profile, SizeThreshold, TcBuildOptions, TcBuilder,
};
pub use tree::{NodeId, ParseTree, TreeBuilder};
pub use tunstall::build_tunstall;

/// How a dictionary was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DictionaryKind {
    Tc,
    Tunstall,
    Custom,
}

impl DictionaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DictionaryKind::Tc => "tc",
            DictionaryKind::Tunstall => "tunstall",
            DictionaryKind::Custom => "custom",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "tc" => Ok(DictionaryKind::Tc),
            "tunstall" => Ok(DictionaryKind::Tunstall),
            "custom" => Ok(DictionaryKind::Custom),
            other => Err(Error::MalformedDictionary(format!("unknown dictionary kind {other:?}"))),
        }
    }
}

/// Construction parameters recorded alongside the tree.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DictionaryMeta {
    pub grid: Option<Grid>,
    pub gamma: Option<f64>,
    pub size_bound: Option<BigUint>,
    pub depth_cap: Option<usize>,
    pub theta: Option<Vec<f64>>,
}

/// A complete proper parsing dictionary with lexicographic segment indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    kind: DictionaryKind,
    model: ExpFamilyModel,
    meta: DictionaryMeta,
    m_target: u64,
    tree: ParseTree,
}

/// A fixed-width binary codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub value: u64,
    pub width: u32,
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in (0..self.width).rev() {
            f.write_str(if self.value >> bit & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Outcome of parsing one segment off a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseResult {
    pub index: usize,
    pub length: usize,
    pub codeword: Codeword,
}

/// A finite stream cut into segments, plus the letters after the last full segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub parses: Vec<ParseResult>,
    pub remainder: Vec<u8>,
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

impl Dictionary {
    pub fn new(
        kind: DictionaryKind,
        model: ExpFamilyModel,
        tree: ParseTree,
        m_target: u64,
        meta: DictionaryMeta,
    ) -> Result<Self> {
        if tree.alphabet_size() != model.alphabet_size() {
            return Err(Error::MalformedDictionary(format!(
                "tree is {}-ary but the model has {} letters",
                tree.alphabet_size(),
                model.alphabet_size()
            )));
        }
        if tree.leaf_count() as u64 > m_target {
            return Err(Error::MalformedDictionary(format!(
                "{} segments exceed the target size {m_target}",
                tree.leaf_count()
            )));
        }
        Ok(Dictionary {
            kind,
            model,
            meta,
            m_target,
            tree,
        })
    }

    /// The dictionary of the `k` single letters.
    pub fn single_letters(model: &ExpFamilyModel, m_target: u64) -> Result<Self> {
        let tree = ParseTree::single_letters(model.alphabet_size());
        Self::new(DictionaryKind::Custom, model.clone(), tree, m_target, DictionaryMeta::default())
    }

    /// A dictionary from an explicit segment list.
    pub fn from_segments(model: &ExpFamilyModel, segments: &[Sequence], m_target: u64) -> Result<Self> {
        let tree = ParseTree::from_segments(model.alphabet_size(), segments)?;
        Self::new(DictionaryKind::Custom, model.clone(), tree, m_target, DictionaryMeta::default())
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn model(&self) -> &ExpFamilyModel {
        &self.model
    }

    pub fn meta(&self) -> &DictionaryMeta {
        &self.meta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.meta.gamma
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.meta.grid.as_ref()
    }

    pub fn m_target(&self) -> u64 {
        self.m_target
    }

    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    /// Number of segments `|D|`.
    pub fn size(&self) -> usize {
        self.tree.leaf_count()
    }

    /// `ceil(log2 |D|)`.
    pub fn codeword_width(&self) -> u32 {
        ceil_log2(self.size() as u64)
    }

    /// Segments in lexicographic order.
    pub fn segments(&self) -> impl Iterator<Item = Sequence> + '_ {
        (0..self.size()).map(|i| self.tree.segment(i))
    }

    /// The segment with index `index`.
    pub fn decode(&self, index: usize) -> Result<Sequence> {
        if index >= self.size() {
            return Err(Error::IndexOutOfRange {
                index,
                size: self.size(),
            });
        }
        Ok(self.tree.segment(index))
    }

    /// Decodes a fixed-width codeword.
    pub fn decode_codeword(&self, codeword: Codeword) -> Result<Sequence> {
        if codeword.width != self.codeword_width() {
            return Err(Error::InvalidArgument(format!(
                "codeword has {} bits, dictionary uses {}",
                codeword.width,
                self.codeword_width()
            )));
        }
        self.decode(codeword.value as usize)
    }

    /// Walks the tree from the root until a leaf.
    pub fn parse_one(&self, stream: &mut impl Iterator<Item = u8>) -> Result<ParseResult> {
        let mut node = TreeBuilder::ROOT;
        let mut consumed = 0;
        while !self.tree.is_leaf(node) {
            let letter = stream.next().ok_or(Error::StreamExhausted { consumed })?;
            self.model.check_letter(letter)?;
            node = self.tree.child(node, letter).expect("internal node has children");
            consumed += 1;
        }
        let index = self.tree.leaf_rank(node).expect("parse ends at a leaf");
        Ok(ParseResult {
            index,
            length: consumed,
            codeword: Codeword {
                value: index as u64,
                width: self.codeword_width(),
            },
        })
    }

    /// Index of `segment` if it is in the dictionary.
    pub fn index_of(&self, segment: &[u8]) -> Option<usize> {
        let mut node = TreeBuilder::ROOT;
        for &letter in segment {
            if usize::from(letter) >= self.tree.alphabet_size() {
                return None;
            }
            node = self.tree.child(node, letter)?;
        }
        self.tree.leaf_rank(node)
    }

    /// Parses a finite stream into successive segments.
    pub fn encode(&self, letters: &[u8]) -> Result<Encoded> {
        self.model.check_sequence(letters)?;
        let mut parses = Vec::new();
        let mut pos = 0;
        while pos < letters.len() {
            let mut stream = letters[pos..].iter().copied();
            match self.parse_one(&mut stream) {
                Ok(parse) => {
                    pos += parse.length;
                    parses.push(parse);
                }
                Err(Error::StreamExhausted { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(Encoded {
            parses,
            remainder: letters[pos..].to_vec(),
        })
    }

    pub fn max_segment_length(&self) -> usize {
        self.tree.max_depth()
    }

    /// Number of segments of each length.
    pub fn segment_length_histogram(&self) -> BTreeMap<usize, u64> {
        self.tree.depth_histogram()
    }

    /// `log2 p_theta(x*)` for every segment in index order.
    pub fn leaf_log_probs(&self, theta: &[f64]) -> Vec<f64> {
        let node_lp = self.tree.node_log_probs(&self.model.letter_log_probs(theta));
        self.tree.leaves().iter().map(|&l| node_lp[l as usize]).collect()
    }

    /// Expected segment length under `p_theta`.
    pub fn expected_length(&self, theta: &[f64]) -> f64 {
        self.leaf_log_probs(theta)
            .iter()
            .zip(self.tree.leaves())
            .map(|(&lp, &l)| lp.exp2() * self.tree.depth(l) as f64)
            .sum()
    }

    /// Checks completeness, properness, the size bound and leaf-mass
    /// normalization at each given parameter.
    pub fn check_invariants(&self, thetas: &[Vec<f64>]) -> Result<()> {
        self.tree.check_structure()?;
        if self.size() as u64 > self.m_target {
            return Err(Error::MalformedDictionary(format!(
                "{} segments exceed the target size {}",
                self.size(),
                self.m_target
            )));
        }
        for theta in thetas {
            let total: f64 = self.leaf_log_probs(theta).iter().map(|lp| lp.exp2()).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedDictionary(format!(
                    "leaf probabilities sum to {total} at theta {theta:?}"
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the text format.
    pub fn to_text(&self) -> String {
        format::write(self)
    }

    /// Parses the text format.
    pub fn from_text(text: &str) -> Result<Self> {
        format::read(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tunstall_example() -> Dictionary {
        let model = ExpFamilyModel::bernoulli();
        let segs: Vec<Sequence> = [&[0u8, 0][..], &[0, 1], &[1]].iter().map(|s| Sequence::from(*s)).collect();
        Dictionary::from_segments(&model, &segs, 3).unwrap()
    }

    #[test]
    fn parse_examples() {
        let model = ExpFamilyModel::ternary();
        let single = Dictionary::single_letters(&model, 3).unwrap();
        let r = single.parse_one(&mut [1u8, 0, 2].into_iter()).unwrap();
        assert_eq!((r.index, r.length), (1, 1));

        let d = tunstall_example();
        let r = d.parse_one(&mut [0u8, 1, 1, 0].into_iter()).unwrap();
        assert_eq!((r.index, r.length), (1, 2));
        assert_eq!(r.codeword.to_string(), "01");
        assert!(matches!(
            d.parse_one(&mut [0u8].into_iter()),
            Err(Error::StreamExhausted { consumed: 1 })
        ));
    }

    #[test]
    fn decode_examples() {
        let d = tunstall_example();
        assert_eq!(d.decode(0).unwrap().letters(), &[0, 0]);
        let all: Vec<_> = (0..3).map(|i| d.decode(i).unwrap()).collect();
        assert_eq!(all, d.segments().collect::<Vec<_>>());
        assert!(matches!(d.decode(3), Err(Error::IndexOutOfRange { .. })));
        for i in 0..3 {
            let seg = d.decode(i).unwrap();
            assert_eq!(d.index_of(&seg), Some(i));
            let mut stream = seg.iter().copied().chain(std::iter::repeat(0));
            assert_eq!(d.parse_one(&mut stream).unwrap().index, i);
        }
    }

    #[test]
    fn encode_splits_a_finite_stream() {
        let d = tunstall_example();
        let enc = d.encode(&[1, 0, 0, 0, 1, 0]).unwrap();
        let idx: Vec<_> = enc.parses.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![2, 0, 1]);
        assert_eq!(enc.remainder, vec![0]);
        let enc = d.encode(&[1, 0, 1]).unwrap();
        assert_eq!(enc.parses.len(), 2);
        assert!(enc.remainder.is_empty());
        assert!(d.encode(&[3]).is_err());
    }

    #[test]
    fn histogram_and_lengths() {
        let d = tunstall_example();
        assert_eq!(d.max_segment_length(), 2);
        assert_eq!(d.segment_length_histogram(), BTreeMap::from([(1, 1), (2, 2)]));
        let single = Dictionary::single_letters(&ExpFamilyModel::ternary(), 3).unwrap();
        assert_eq!(single.max_segment_length(), 1);
        assert_eq!(single.segment_length_histogram(), BTreeMap::from([(1, 3)]));
        assert_eq!(d.codeword_width(), 2);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(65), 7);
    }
}
