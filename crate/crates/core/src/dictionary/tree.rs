//! Complete proper `k`-ary parse trees stored as an arena.
//!
//! Children of an internal node occupy `k` consecutive slots, and every node
//! is stored after its parent. Leaves are ranked in lexicographic order of
//! the segments they spell.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::Sequence;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Node {
    first_child: u32,
    parent: u32,
    letter: u8,
    depth: u32,
}

/// Identifier of a node in a [`ParseTree`].
pub type NodeId = u32;

#[derive(Clone, Debug)]
pub struct ParseTree {
    k: usize,
    nodes: Vec<Node>,
    leaves: Vec<NodeId>,
    leaf_rank: Vec<u32>,
}

impl PartialEq for ParseTree {
    // Equal as segment sets; arena layout depends on construction order.
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.leaves.len() == other.leaves.len()
            && self
                .leaves
                .iter()
                .zip(&other.leaves)
                .all(|(&a, &b)| self.path(a) == other.path(b))
    }
}

impl Eq for ParseTree {}

/// Incremental construction; callers expand leaves until done, then call
/// [`TreeBuilder::finish`].
#[derive(Clone, Debug)]
pub struct TreeBuilder {
    k: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new(k: usize) -> Self {
        TreeBuilder {
            k,
            nodes: vec![Node {
                first_child: NONE,
                parent: NONE,
                letter: 0,
                depth: 0,
            }],
        }
    }

    pub const ROOT: NodeId = 0;

    /// Gives `node` its `k` children and returns the id of the first.
    pub fn expand(&mut self, node: NodeId) -> NodeId {
        let first = self.nodes.len() as u32;
        let depth = self.nodes[node as usize].depth + 1;
        debug_assert_eq!(self.nodes[node as usize].first_child, NONE);
        self.nodes[node as usize].first_child = first;
        for letter in 0..self.k {
            self.nodes.push(Node {
                first_child: NONE,
                parent: node,
                letter: letter as u8,
                depth,
            });
        }
        first
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn finish(self) -> ParseTree {
        let mut leaves = Vec::with_capacity((self.nodes.len() * (self.k - 1)) / self.k + 1);
        let mut leaf_rank = vec![NONE; self.nodes.len()];
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = self.nodes[id as usize];
            if node.first_child == NONE {
                leaf_rank[id as usize] = leaves.len() as u32;
                leaves.push(id);
            } else {
                for c in (0..self.k as u32).rev() {
                    stack.push(node.first_child + c);
                }
            }
        }
        ParseTree {
            k: self.k,
            nodes: self.nodes,
            leaves,
            leaf_rank,
        }
    }
}

impl ParseTree {
    /// The tree whose leaves are the `k` single letters.
    pub fn single_letters(k: usize) -> Self {
        let mut b = TreeBuilder::new(k);
        b.expand(TreeBuilder::ROOT);
        b.finish()
    }

    /// Rebuilds a tree from its segments, which must form a complete proper set.
    pub fn from_segments(k: usize, segments: &[Sequence]) -> Result<Self> {
        if !(2..=256).contains(&k) {
            return Err(Error::MalformedDictionary(format!("alphabet size {k}")));
        }
        let mut b = TreeBuilder::new(k);
        let mut is_leaf = vec![false];
        for seg in segments {
            if seg.is_empty() {
                return Err(Error::MalformedDictionary("empty segment".into()));
            }
            let mut node = TreeBuilder::ROOT;
            for (pos, &letter) in seg.iter().enumerate() {
                if usize::from(letter) >= k {
                    return Err(Error::MalformedDictionary(format!(
                        "letter {letter} outside alphabet of size {k}"
                    )));
                }
                if is_leaf[node as usize] {
                    return Err(Error::MalformedDictionary(format!(
                        "segment {seg} extends another segment (not proper)"
                    )));
                }
                if b.nodes[node as usize].first_child == NONE {
                    b.expand(node);
                    is_leaf.resize(b.nodes.len(), false);
                }
                node = b.nodes[node as usize].first_child + u32::from(letter);
                if pos + 1 == seg.len() {
                    if is_leaf[node as usize] {
                        return Err(Error::MalformedDictionary(format!(
                            "segment {seg} appears twice"
                        )));
                    }
                    if b.nodes[node as usize].first_child != NONE {
                        return Err(Error::MalformedDictionary(format!(
                            "segment {seg} is a prefix of another segment (not proper)"
                        )));
                    }
                    is_leaf[node as usize] = true;
                }
            }
        }
        if let Some(id) = (1..b.nodes.len()).find(|&i| b.nodes[i].first_child == NONE && !is_leaf[i]) {
            let tree = b.clone().finish();
            return Err(Error::MalformedDictionary(format!(
                "no segment covers the prefix {} (not complete)",
                tree.path(id as u32)
            )));
        }
        if b.nodes[0].first_child == NONE {
            return Err(Error::MalformedDictionary("no segments".into()));
        }
        Ok(b.finish())
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id as usize].first_child == NONE
    }

    pub fn child(&self, id: NodeId, letter: u8) -> Option<NodeId> {
        let first = self.nodes[id as usize].first_child;
        (first != NONE).then(|| first + u32::from(letter))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let p = self.nodes[id as usize].parent;
        (p != NONE).then_some(p)
    }

    pub fn letter(&self, id: NodeId) -> u8 {
        self.nodes[id as usize].letter
    }

    pub fn depth(&self, id: NodeId) -> usize {
        self.nodes[id as usize].depth as usize
    }

    /// Leaf node ids in lexicographic order of their segments.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Lexicographic rank of a leaf.
    pub fn leaf_rank(&self, id: NodeId) -> Option<usize> {
        let r = self.leaf_rank[id as usize];
        (r != NONE).then_some(r as usize)
    }

    /// Letters on the path from the root to `id`.
    pub fn path(&self, id: NodeId) -> Sequence {
        let mut letters = Vec::with_capacity(self.depth(id));
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            letters.push(self.letter(cur));
            cur = p;
        }
        letters.reverse();
        Sequence::new(letters)
    }

    /// Segment with lexicographic rank `index`.
    pub fn segment(&self, index: usize) -> Sequence {
        self.path(self.leaves[index])
    }

    /// Letter counts along the path to `id`.
    pub fn path_counts(&self, id: NodeId) -> Vec<u64> {
        let mut counts = vec![0u64; self.k];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            counts[usize::from(self.letter(cur))] += 1;
            cur = p;
        }
        counts
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(|&l| self.depth(l)).max().unwrap_or(0)
    }

    /// Number of leaves at each depth.
    pub fn depth_histogram(&self) -> BTreeMap<usize, u64> {
        let mut hist = BTreeMap::new();
        for &l in &self.leaves {
            *hist.entry(self.depth(l)).or_insert(0) += 1;
        }
        hist
    }

    /// `log2` probability of every node given per-letter log probabilities;
    /// indexed by node id.
    pub fn node_log_probs(&self, letter_log_probs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for id in 1..self.nodes.len() {
            let node = self.nodes[id];
            out[id] = out[node.parent as usize] + letter_log_probs[usize::from(node.letter)];
        }
        out
    }

    /// Structural check: every node is a leaf or has exactly `k` children, the
    /// root is internal, and leaf ranks follow lexicographic order.
    pub fn check_structure(&self) -> Result<()> {
        if self.is_leaf(0) {
            return Err(Error::MalformedDictionary("root is a leaf".into()));
        }
        let mut child_count = vec![0usize; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate().skip(1) {
            let parent = &self.nodes[node.parent as usize];
            if parent.first_child == NONE
                || id as u32 != parent.first_child + u32::from(node.letter)
                || node.depth != parent.depth + 1
            {
                return Err(Error::MalformedDictionary(format!("node {id} is misplaced")));
            }
            child_count[node.parent as usize] += 1;
        }
        for (id, node) in self.nodes.iter().enumerate() {
            let expected = if node.first_child == NONE { 0 } else { self.k };
            if child_count[id] != expected {
                return Err(Error::MalformedDictionary(format!(
                    "node {id} has {} children, expected {expected}",
                    child_count[id]
                )));
            }
        }
        let leaf_total = self.nodes.iter().filter(|n| n.first_child == NONE).count();
        if leaf_total != self.leaves.len() {
            return Err(Error::MalformedDictionary("leaf list is incomplete".into()));
        }
        for pair in self.leaves.windows(2) {
            if self.path(pair[0]) >= self.path(pair[1]) {
                return Err(Error::MalformedDictionary("leaves are out of order".into()));
            }
        }
        Ok(())
    }

    /// Cuts every subtree rooted at depth `depth`, turning those nodes into leaves.
    pub fn prune(&self, depth: usize) -> ParseTree {
        let mut b = TreeBuilder::new(self.k);
        let mut map = vec![NONE; self.nodes.len()];
        map[0] = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            let new_id = map[id];
            if new_id == NONE || node.first_child == NONE || node.depth as usize >= depth {
                continue;
            }
            let first = b.expand(new_id);
            for c in 0..self.k as u32 {
                map[(node.first_child + c) as usize] = first + c;
            }
        }
        b.finish()
    }
}
