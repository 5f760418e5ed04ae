//! The type-complexity (TC) dictionary.
//!
//! A node `x^l` becomes a leaf at the first length where its quantized type
//! class is larger than `2^gamma`. The decision depends on the path only
//! through the statistic sum at each length, so leaf counts are computed on
//! aggregated frontiers keyed by statistic sum and the explicit tree is
//! materialized once the threshold is fixed.
//!
//! The all-one-letter paths of many models never cross any threshold (their
//! class stays a single sequence), so every build carries a depth cap at
//! which remaining nodes become forced leaves.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{FromPrimitive, Zero};

use super::{Dictionary, DictionaryKind, DictionaryMeta, ParseTree, TreeBuilder};
use crate::error::{Error, Result};
use crate::models::ExpFamilyModel;
use crate::qtypes::{big_log2, CellIndex, Grid, TypeCounter};

/// Leaf test `|T| > bound`, where `bound` is the largest integer with `log2 bound <= gamma`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SizeThreshold {
    bound: BigUint,
}

impl SizeThreshold {
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma > 16_000.0 {
            return Err(Error::InvalidArgument(format!("gamma {gamma} is out of range")));
        }
        if gamma < 0.0 {
            return Ok(Self::from_bound(BigUint::zero()));
        }
        let whole = gamma.floor();
        let frac = (gamma - whole).exp2();
        let mut bound = BigUint::from_f64((frac * (1u64 << 52) as f64).floor())
            .expect("finite mantissa")
            << whole as usize;
        bound >>= 52usize;
        if whole >= 50.0 {
            // Neighbouring integers share a double logarithm up here.
            return Ok(Self::from_bound(bound));
        }
        while big_log2(&(&bound + 1u32)) <= gamma {
            bound += 1u32;
        }
        while !bound.is_zero() && big_log2(&bound) > gamma {
            bound -= 1u32;
        }
        Ok(Self::from_bound(bound))
    }

    pub fn from_bound(bound: BigUint) -> Self {
        SizeThreshold { bound }
    }

    pub fn bound(&self) -> &BigUint {
        &self.bound
    }

    /// `log2 bound`, or `-1` for the bound zero (every class crosses).
    pub fn gamma(&self) -> f64 {
        if self.bound.is_zero() {
            -1.0
        } else {
            big_log2(&self.bound)
        }
    }

    pub fn crosses(&self, size: &BigUint) -> bool {
        size > &self.bound
    }
}

/// `1 + ceil(max(gamma, 1) / log2(1 / p_max))`: a path that has not crossed
/// by then has probability at most `2^-gamma` under every parameter.
pub fn segment_length_cap(model: &ExpFamilyModel, gamma: f64) -> usize {
    let per_letter = -model.p_max().log2();
    1 + (gamma.max(1.0) / per_letter).ceil() as usize
}

/// `log2 M - d log2 log2 M`.
pub fn gamma_reference(stat_dim: usize, m: u64) -> f64 {
    let log_m = (m as f64).log2();
    log_m - stat_dim as f64 * log_m.log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TcBuildOptions {
    pub leaf_cap: u64,
    pub depth_cap: usize,
}

/// Counters gathered while building.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub leaves: u64,
    /// Leaves created by the depth cap rather than by crossing the threshold.
    pub forced_leaves: u64,
    /// Tree edges along which the class size decreased.
    pub monotonicity_violations: u64,
    /// Leaves where the literal two-condition rule does not hold.
    pub literal_mismatches: u64,
    pub max_depth: usize,
}

/// Leaf count and diagnostics of a build, without the tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Fits {
        stats: BuildStats,
        /// Smallest class size among threshold-crossing leaves.
        min_crossing: Option<BigUint>,
    },
    Exceeded {
        depth: usize,
    },
}

/// Result of the threshold search.
#[derive(Clone, Debug)]
pub struct GammaChoice {
    pub gamma: f64,
    pub threshold: SizeThreshold,
    pub gamma_ref: f64,
    /// Next threshold at which the dictionary changes; it exceeds `M` leaves.
    pub next_threshold: SizeThreshold,
    pub depth_cap: usize,
    pub dictionary: Dictionary,
    pub stats: BuildStats,
    pub builds: usize,
}

impl GammaChoice {
    pub fn next_gamma(&self) -> f64 {
        self.next_threshold.gamma()
    }
}

/// TC construction for one model and grid, sharing a memoized counter.
#[derive(Clone, Debug)]
pub struct TcBuilder {
    model: ExpFamilyModel,
    grid: Grid,
    counter: TypeCounter,
}

impl TcBuilder {
    pub fn new(model: &ExpFamilyModel, grid: &Grid) -> Result<Self> {
        Ok(TcBuilder {
            model: model.clone(),
            grid: grid.clone(),
            counter: TypeCounter::new(model, grid)?,
        })
    }

    pub fn model(&self) -> &ExpFamilyModel {
        &self.model
    }

    pub fn counter(&mut self) -> &mut TypeCounter {
        &mut self.counter
    }

    /// Runs the construction on aggregated frontiers. Sizes of every class
    /// met along the way are added to `seen` when given.
    pub fn profile(
        &mut self,
        threshold: &SizeThreshold,
        opts: TcBuildOptions,
        mut seen: Option<&mut BTreeSet<BigUint>>,
    ) -> Result<Profile> {
        let k = self.model.alphabet_size();
        let d = self.model.stat_dim();
        let letter_stats: Vec<Vec<i64>> =
            (0..k).map(|x| self.counter.lattice().letter_stat(x).to_vec()).collect();
        // Frontier: statistic sum -> (node count, class size; None at the root).
        let mut frontier: Vec<(Vec<i64>, u64, Option<BigUint>)> = vec![(vec![0; d], 1, None)];
        let mut stats = BuildStats::default();
        let mut min_crossing: Option<BigUint> = None;
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next: HashMap<Vec<i64>, u64> = HashMap::new();
            let mut edges: Vec<(Vec<i64>, u64, Option<BigUint>)> = Vec::new();
            for (sum, count, size) in &frontier {
                for stat in &letter_stats {
                    let child: Vec<i64> = sum.iter().zip(stat).map(|(a, b)| a + b).collect();
                    *next.entry(child.clone()).or_insert(0) += count;
                    if size.is_some() {
                        edges.push((child, *count, size.clone()));
                    }
                }
            }
            let mut sizes: HashMap<Vec<i64>, BigUint> = HashMap::with_capacity(next.len());
            for sum in next.keys() {
                let entry = self.counter.entry(depth, sum)?;
                sizes.insert(sum.clone(), entry.size.clone());
            }
            for (child, count, parent_size) in edges {
                if let Some(parent_size) = parent_size {
                    if sizes[&child] < parent_size {
                        stats.monotonicity_violations += count;
                    }
                }
            }
            let mut alive = Vec::new();
            let mut alive_total: u64 = 0;
            let mut keys: Vec<_> = next.into_iter().collect();
            keys.sort();
            for (sum, count) in keys {
                let size = sizes.remove(&sum).expect("size looked up");
                if let Some(seen) = seen.as_deref_mut() {
                    seen.insert(size.clone());
                }
                if threshold.crosses(&size) {
                    stats.leaves += count;
                    stats.max_depth = depth;
                    if min_crossing.as_ref().is_none_or(|m| &size < m) {
                        min_crossing = Some(size);
                    }
                } else if depth >= opts.depth_cap {
                    stats.leaves += count;
                    stats.forced_leaves += count;
                    stats.literal_mismatches += count;
                    stats.max_depth = depth;
                } else {
                    alive_total = alive_total.saturating_add(count);
                    alive.push((sum, count, Some(size)));
                }
            }
            let lower_bound = stats
                .leaves
                .saturating_add(alive_total.saturating_mul(k as u64));
            if stats.leaves > opts.leaf_cap || (alive_total > 0 && lower_bound > opts.leaf_cap) {
                return Ok(Profile::Exceeded { depth });
            }
            frontier = alive;
        }
        Ok(Profile::Fits { stats, min_crossing })
    }

    /// Builds the explicit dictionary.
    pub fn build(
        &mut self,
        threshold: &SizeThreshold,
        opts: TcBuildOptions,
        m_target: u64,
    ) -> Result<(Dictionary, BuildStats)> {
        let k = self.model.alphabet_size();
        if opts.leaf_cap < k as u64 {
            return Err(Error::InvalidArgument(format!(
                "leaf cap {} is below the alphabet size {k}",
                opts.leaf_cap
            )));
        }
        let stats = match self.profile(threshold, opts, None)? {
            Profile::Fits { stats, .. } => stats,
            Profile::Exceeded { depth } => {
                return Err(Error::LeafCapExceeded {
                    cap: opts.leaf_cap,
                    depth,
                })
            }
        };
        let d = self.model.stat_dim();
        let letter_stats: Vec<Vec<i64>> =
            (0..k).map(|x| self.counter.lattice().letter_stat(x).to_vec()).collect();
        let mut builder = TreeBuilder::new(k);
        let mut frontier = vec![(TreeBuilder::ROOT, vec![0i64; d])];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut decisions: HashMap<Vec<i64>, bool> = HashMap::new();
            let mut next = Vec::with_capacity(frontier.len() * k);
            for (node, sum) in frontier {
                let first = builder.expand(node);
                for (letter, stat) in letter_stats.iter().enumerate() {
                    let child: Vec<i64> = sum.iter().zip(stat).map(|(a, b)| a + b).collect();
                    let leaf = match decisions.get(&child) {
                        Some(&leaf) => leaf,
                        None => {
                            let entry = self.counter.entry(depth, &child)?;
                            let leaf = threshold.crosses(&entry.size) || depth >= opts.depth_cap;
                            decisions.insert(child.clone(), leaf);
                            leaf
                        }
                    };
                    if !leaf {
                        next.push((first + letter as u32, child));
                    }
                }
            }
            frontier = next;
        }
        let tree = builder.finish();
        debug_assert_eq!(tree.leaf_count() as u64, stats.leaves);
        let meta = DictionaryMeta {
            grid: Some(self.grid.clone()),
            gamma: Some(threshold.gamma()),
            size_bound: Some(threshold.bound().clone()),
            depth_cap: Some(opts.depth_cap),
            theta: None,
        };
        let dict = Dictionary::new(DictionaryKind::Tc, self.model.clone(), tree, m_target, meta)?;
        Ok((dict, stats))
    }

    /// Largest threshold whose dictionary has at most `m` segments.
    ///
    /// The depth cap is fixed at [`segment_length_cap`] of `log2 m`, so the
    /// segment count is a step function of the bound that changes only at
    /// class sizes met during construction; the search bisects over those.
    pub fn choose_gamma(&mut self, m: u64) -> Result<GammaChoice> {
        let k = self.model.alphabet_size() as u64;
        if m < k {
            return Err(Error::DictionaryTooSmall {
                size: m,
                alphabet_size: k as usize,
            });
        }
        let log_m = (m as f64).log2();
        let opts = TcBuildOptions {
            leaf_cap: m,
            depth_cap: segment_length_cap(&self.model, log_m),
        };
        let mut pool = BTreeSet::new();
        let mut builds = 0usize;

        let mut lo = SizeThreshold::from_bound(BigUint::zero());
        let mut lo_crossing = match self.profile(&lo, opts, Some(&mut pool))? {
            Profile::Fits { min_crossing, .. } => min_crossing,
            Profile::Exceeded { .. } => {
                return Err(Error::DictionaryTooSmall {
                    size: m,
                    alphabet_size: k as usize,
                })
            }
        };
        builds += 1;

        let mut gamma = log_m.max(1.0);
        let mut hi = loop {
            let candidate = SizeThreshold::from_gamma(gamma)?;
            builds += 1;
            match self.profile(&candidate, opts, Some(&mut pool))? {
                Profile::Fits { min_crossing, .. } => {
                    lo = candidate;
                    lo_crossing = min_crossing;
                    gamma *= 2.0;
                    if gamma > 8192.0 {
                        return Err(Error::Divergence(
                            "no threshold exceeds the dictionary size".into(),
                        ));
                    }
                }
                Profile::Exceeded { .. } => break candidate,
            }
        };

        loop {
            let Some(next_change) = lo_crossing.clone() else {
                // Every leaf of the lo build is forced; raising the bound changes nothing.
                break;
            };
            if &next_change >= hi.bound() {
                break;
            }
            let candidates: Vec<&BigUint> = pool.range(next_change..hi.bound().clone()).collect();
            let mid = SizeThreshold::from_bound(candidates[candidates.len() / 2].clone());
            builds += 1;
            match self.profile(&mid, opts, Some(&mut pool))? {
                Profile::Fits { min_crossing, .. } => {
                    lo = mid;
                    lo_crossing = min_crossing;
                }
                Profile::Exceeded { .. } => hi = mid,
            }
        }

        let next_threshold = match &lo_crossing {
            Some(b) if b < hi.bound() => SizeThreshold::from_bound(b.clone()),
            _ => hi.clone(),
        };
        let (dictionary, stats) = self.build(&lo, opts, m)?;
        Ok(GammaChoice {
            gamma: lo.gamma(),
            gamma_ref: gamma_reference(self.model.stat_dim(), m),
            threshold: lo,
            next_threshold,
            depth_cap: opts.depth_cap,
            dictionary,
            stats,
            builds,
        })
    }
}

/// TC dictionary at threshold `gamma`, with the depth cap derived from `gamma`.
pub fn build_tc_dictionary(
    model: &ExpFamilyModel,
    grid: &Grid,
    gamma: f64,
    leaf_cap: u64,
) -> Result<Dictionary> {
    let threshold = SizeThreshold::from_gamma(gamma)?;
    let opts = TcBuildOptions {
        leaf_cap,
        depth_cap: segment_length_cap(model, gamma),
    };
    let mut builder = TcBuilder::new(model, grid)?;
    Ok(builder.build(&threshold, opts, leaf_cap)?.0)
}

/// Threshold search for a target dictionary size `m`.
pub fn choose_gamma(model: &ExpFamilyModel, grid: &Grid, m: u64) -> Result<GammaChoice> {
    TcBuilder::new(model, grid)?.choose_gamma(m)
}

/// `k 2^gamma sum_{l <= l_max} l^(d-1)`, the counting bound on `|D|`.
pub fn size_bound_chain(k: usize, stat_dim: usize, gamma: f64, max_length: usize) -> f64 {
    let sum: f64 = (1..=max_length)
        .map(|l| (l as f64).powi(stat_dim as i32 - 1))
        .sum();
    k as f64 * gamma.exp2() * sum
}

/// Per-length check of the segment-count bound.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelBoundRow {
    /// Segment length `l + 1`.
    pub length: usize,
    pub segments: u64,
    /// Segments that crossed the threshold (not forced by the depth cap).
    pub crossing_segments: u64,
    /// Cells at length `l` that are internal and have a crossing child.
    pub parent_cells: u64,
    /// Total size of those cells.
    pub parent_mass: f64,
    /// `k 2^gamma l^(d-1)`.
    pub nominal_bound: f64,
}

impl LevelBoundRow {
    /// `crossing <= k sum_{T} |T| <= k 2^gamma |A|` with the measured cell count `|A|`.
    pub fn holds(&self, k: usize, gamma: f64) -> bool {
        let k = k as f64;
        self.crossing_segments as f64 <= k * self.parent_mass
            && self.parent_mass <= gamma.exp2().max(1.0) * self.parent_cells as f64
    }

    /// Segments over the constant-free nominal bound.
    pub fn nominal_ratio(&self) -> f64 {
        self.segments as f64 / self.nominal_bound
    }
}

impl TcBuilder {
    /// Measures the quantities in the per-length segment-count bound of a
    /// dictionary built by this builder.
    pub fn level_bound_report(&mut self, dict: &Dictionary) -> Result<Vec<LevelBoundRow>> {
        let bound = dict
            .meta()
            .size_bound
            .clone()
            .ok_or_else(|| Error::InvalidArgument("dictionary has no size threshold".into()))?;
        let threshold = SizeThreshold::from_bound(bound);
        let gamma = threshold.gamma().max(0.0);
        let tree = dict.tree();
        let k = tree.alphabet_size();
        let d = self.model.stat_dim();
        let letter_stats: Vec<Vec<i64>> =
            (0..k).map(|x| self.counter.lattice().letter_stat(x).to_vec()).collect();
        let mut sums: Vec<Vec<i64>> = vec![vec![0; d]; tree.node_count()];
        for id in 1..tree.node_count() as u32 {
            let parent = tree.parent(id).expect("non-root node");
            let stat = &letter_stats[usize::from(tree.letter(id))];
            sums[id as usize] = sums[parent as usize].iter().zip(stat).map(|(a, b)| a + b).collect();
        }
        let max_len = tree.max_depth();
        let mut rows: Vec<LevelBoundRow> = (1..=max_len)
            .map(|len| LevelBoundRow {
                length: len,
                segments: 0,
                crossing_segments: 0,
                parent_cells: 0,
                parent_mass: 0.0,
                nominal_bound: k as f64
                    * gamma.exp2()
                    * ((len - 1).max(1) as f64).powi(d as i32 - 1),
            })
            .collect();
        let mut parent_cells: Vec<BTreeSet<Vec<i64>>> = vec![BTreeSet::new(); max_len];
        for &leaf in tree.leaves() {
            let len = tree.depth(leaf);
            let row = &mut rows[len - 1];
            row.segments += 1;
            let size = self.counter.entry(len, &sums[leaf as usize])?.size.clone();
            if threshold.crosses(&size) {
                row.crossing_segments += 1;
                let parent = tree.parent(leaf).expect("leaf has a parent");
                if len >= 2 {
                    parent_cells[len - 1].insert(self.counter.lattice().cell_idx(len - 1, &sums[parent as usize]));
                }
            }
        }
        for (len, cells) in parent_cells.iter().enumerate().skip(1) {
            let row = &mut rows[len];
            row.parent_cells = cells.len() as u64;
            for cell in cells {
                let size = self
                    .counter
                    .type_class_size(&CellIndex { length: len, idx: cell.clone() }.into())?;
                row.parent_mass += big_log2(&size).exp2();
            }
        }
        // The empty prefix is a single class of size one.
        rows[0].parent_cells = 1;
        rows[0].parent_mass = 1.0;
        Ok(rows)
    }
}

impl ParseTree {
    /// The full tree of depth `depth`.
    pub fn full(k: usize, depth: usize) -> ParseTree {
        let mut b = TreeBuilder::new(k);
        let mut frontier = vec![TreeBuilder::ROOT];
        for _ in 0..depth.max(1) {
            let mut next = Vec::with_capacity(frontier.len() * k);
            for node in frontier {
                let first = b.expand(node);
                next.extend((0..k as u32).map(|c| first + c));
            }
            frontier = next;
        }
        b.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Sequence;
    use crate::qtypes::cell_of;
    use num_rational::BigRational;
    use num_traits::One;

    /// Reference builder: walks explicit sequences and asks the rational
    /// cell oracle for every class size.
    fn reference_segments(model: &ExpFamilyModel, grid: &Grid, bound: &BigUint, depth_cap: usize) -> Vec<Sequence> {
        fn class_size(model: &ExpFamilyModel, grid: &Grid, seq: &[u8]) -> BigUint {
            let len = seq.len();
            let cell = cell_of(model, grid, len, &model.suff_stat_avg(seq).unwrap()).unwrap().0;
            let k = model.alphabet_size() as u8;
            let mut count = BigUint::zero();
            let mut all = vec![Vec::new()];
            for _ in 0..len {
                all = all
                    .into_iter()
                    .flat_map(|s: Vec<u8>| (0..k).map(move |a| [s.clone(), vec![a]].concat()))
                    .collect();
            }
            for s in all {
                let c = cell_of(model, grid, len, &model.suff_stat_avg(&s).unwrap()).unwrap().0;
                if c == cell {
                    count += 1u32;
                }
            }
            count
        }
        let k = model.alphabet_size() as u8;
        let mut out = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            for a in (0..k).rev() {
                let mut s: Vec<u8> = prefix.clone();
                s.push(a);
                if &class_size(model, grid, &s) > bound || s.len() >= depth_cap {
                    out.push(Sequence::new(s));
                } else {
                    stack.push(s);
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn threshold_from_gamma() {
        assert_eq!(SizeThreshold::from_gamma(-0.5).unwrap().bound(), &BigUint::zero());
        assert_eq!(SizeThreshold::from_gamma(0.0).unwrap().bound(), &BigUint::one());
        assert_eq!(SizeThreshold::from_gamma(3.0).unwrap().bound(), &BigUint::from(8u32));
        assert_eq!(SizeThreshold::from_gamma(3.5).unwrap().bound(), &BigUint::from(11u32));
        let t = SizeThreshold::from_bound(BigUint::from(1000u32));
        assert_eq!(SizeThreshold::from_gamma(t.gamma()).unwrap(), t);
        assert_eq!(SizeThreshold::from_gamma(200.0).unwrap().bound(), &(BigUint::one() << 200u32));
    }

    #[test]
    fn gamma_zero_matches_reference_builder() {
        let model = ExpFamilyModel::bernoulli();
        let grid = Grid::standard(1);
        let dict = build_tc_dictionary(&model, &grid, 0.0, 1 << 20).unwrap();
        let cap = segment_length_cap(&model, 0.0);
        let expected = reference_segments(&model, &grid, &BigUint::one(), cap);
        assert_eq!(dict.segments().collect::<Vec<_>>(), expected);
        // Length-1 classes are singletons, so no single letter is a segment.
        assert!(dict.segments().all(|s| s.len() >= 2));
    }

    #[test]
    fn reference_agreement_on_ternary_and_coarse_grid() {
        let model = ExpFamilyModel::ternary();
        let grid = Grid::with_width(BigRational::new(3.into(), 2.into()), 1).unwrap();
        for gamma in [1.0, 2.5, 4.0] {
            let threshold = SizeThreshold::from_gamma(gamma).unwrap();
            let opts = TcBuildOptions { leaf_cap: 1 << 20, depth_cap: 6 };
            let mut b = TcBuilder::new(&model, &grid).unwrap();
            let (dict, _) = b.build(&threshold, opts, 1 << 20).unwrap();
            let expected = reference_segments(&model, &grid, threshold.bound(), 6);
            assert_eq!(dict.segments().collect::<Vec<_>>(), expected, "gamma {gamma}");
        }
    }

    #[test]
    fn oversized_threshold_aborts() {
        let model = ExpFamilyModel::bernoulli();
        let err = build_tc_dictionary(&model, &Grid::standard(1), 30.0, 100).unwrap_err();
        assert!(matches!(err, Error::LeafCapExceeded { cap: 100, .. }));
    }

    #[test]
    fn letter_swap_symmetry() {
        let model = ExpFamilyModel::bernoulli();
        let grid = Grid::standard(1);
        let dict = build_tc_dictionary(&model, &grid, 6.0, 1 << 20).unwrap();
        let mut swapped: Vec<Sequence> = dict
            .segments()
            .map(|s| Sequence::new(s.iter().map(|&x| 1 - x).collect()))
            .collect();
        swapped.sort();
        assert_eq!(swapped, dict.segments().collect::<Vec<_>>());
    }

    #[test]
    fn choose_gamma_at_alphabet_size() {
        for model in [ExpFamilyModel::bernoulli(), ExpFamilyModel::ternary(), ExpFamilyModel::quaternary()] {
            let k = model.alphabet_size() as u64;
            let grid = Grid::standard(model.stat_dim());
            let choice = choose_gamma(&model, &grid, k).unwrap();
            assert_eq!(choice.dictionary.size() as u64, k);
            assert_eq!(choice.dictionary.max_segment_length(), 1);
            assert!(choose_gamma(&model, &grid, k - 1).is_err());
        }
    }

    #[test]
    fn choose_gamma_is_maximal_at_64() {
        let model = ExpFamilyModel::bernoulli();
        let grid = Grid::standard(1);
        let choice = choose_gamma(&model, &grid, 64).unwrap();
        assert!(choice.dictionary.size() <= 64);
        choice.dictionary.check_invariants(&[vec![0.0], vec![1.3]]).unwrap();
        let opts = TcBuildOptions { leaf_cap: 64, depth_cap: choice.depth_cap };
        let mut b = TcBuilder::new(&model, &grid).unwrap();
        assert!(choice.next_gamma() > choice.gamma);
        assert!(matches!(
            b.build(&choice.next_threshold, opts, 64),
            Err(Error::LeafCapExceeded { .. })
        ));
    }

    #[test]
    fn size_chain_and_level_bounds_hold() {
        let model = ExpFamilyModel::bernoulli();
        let grid = Grid::standard(1);
        for m in [16u64, 256, 4096] {
            let choice = choose_gamma(&model, &grid, m).unwrap();
            let d = &choice.dictionary;
            let g = choice.gamma.max(0.0);
            assert!((d.size() as f64) <= size_bound_chain(2, 1, g, d.max_segment_length()));
            let mut b = TcBuilder::new(&model, &grid).unwrap();
            let rows = b.level_bound_report(d).unwrap();
            assert_eq!(rows.iter().map(|r| r.segments).sum::<u64>(), d.size() as u64);
            assert!(rows.iter().all(|r| r.holds(2, g)), "{rows:?}");
        }
        // The constant-free form is exceeded at this size: 50 segments of length 6.
        let choice = choose_gamma(&model, &grid, 256).unwrap();
        let rows = TcBuilder::new(&model, &grid).unwrap().level_bound_report(&choice.dictionary).unwrap();
        assert!(rows.iter().any(|r| r.nominal_ratio() > 1.0));
    }

    #[test]
    fn full_tree_has_all_strings() {
        let t = ParseTree::full(3, 2);
        assert_eq!(t.leaf_count(), 9);
        t.check_structure().unwrap();
    }
}
