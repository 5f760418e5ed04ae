//! Quantized type classes.
//!
//! At length `l` the statistic space is cut into cuboids of side `W / l`:
//! cell `j` along axis `i` is `(o_i + j_i W / l, o_i + (j_i + 1) W / l]`,
//! open below and closed above. The quantized type class of `x^l` is the set
//! of length-`l` sequences whose average statistic falls in the same cell.
//!
//! Membership is decided on an integer lattice: every rational that enters a
//! boundary test is scaled by a common denominator, so the test
//! `o l + j W < S <= o l + (j + 1) W` on the statistic sum `S` is exact.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{format_rational, letter_counts, parse_rational, ExpFamilyModel};

/// Default limit on the number of letter compositions enumerated per length.
pub const DEFAULT_COMPOSITION_CAP: u128 = 100_000_000;

/// Cuboid side scale `W` and boundary offset of the statistic partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    width: BigRational,
    origin: Vec<BigRational>,
}

/// Serialized grid: rationals as `"p/q"` strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GridSpec {
    #[serde(rename = "W")]
    pub width: String,
    pub origin: Vec<String>,
}

impl Grid {
    pub fn new(width: BigRational, origin: Vec<BigRational>) -> Result<Self> {
        if width <= BigRational::zero() {
            return Err(Error::InvalidArgument(format!(
                "grid width must be positive, got {}",
                format_rational(&width)
            )));
        }
        if origin.is_empty() {
            return Err(Error::InvalidArgument("grid origin must have d components".into()));
        }
        Ok(Grid { width, origin })
    }

    /// `W = 1`, origin at zero.
    pub fn standard(stat_dim: usize) -> Self {
        Grid {
            width: BigRational::one(),
            origin: vec![BigRational::zero(); stat_dim],
        }
    }

    /// Grid with the given width and a zero origin.
    pub fn with_width(width: BigRational, stat_dim: usize) -> Result<Self> {
        Self::new(width, vec![BigRational::zero(); stat_dim])
    }

    pub fn width(&self) -> &BigRational {
        &self.width
    }

    pub fn origin(&self) -> &[BigRational] {
        &self.origin
    }

    pub fn stat_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn to_spec(&self) -> GridSpec {
        GridSpec {
            width: format_rational(&self.width),
            origin: self.origin.iter().map(format_rational).collect(),
        }
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        let width = parse_rational(&spec.width)
            .map_err(|e| Error::InvalidArgument(format!("grid width: {e}")))?;
        let origin = spec
            .origin
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidArgument(format!("grid origin: {e}")))?;
        Self::new(width, origin)
    }

    fn check_model(&self, model: &ExpFamilyModel) -> Result<()> {
        if self.stat_dim() != model.stat_dim() {
            return Err(Error::InvalidArgument(format!(
                "grid has dimension {}, model has {}",
                self.stat_dim(),
                model.stat_dim()
            )));
        }
        Ok(())
    }
}

/// A cell of the length-`l` partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub length: usize,
    pub idx: Vec<i64>,
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l={} j={:?}", self.length, self.idx)
    }
}

/// Key of a quantized type class; the cell carries its length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeClassKey {
    pub cell: CellIndex,
}

impl From<CellIndex> for TypeClassKey {
    fn from(cell: CellIndex) -> Self {
        TypeClassKey { cell }
    }
}

/// Returns the cell holding `tau` at length `length` and the cell center.
pub fn cell_of(
    model: &ExpFamilyModel,
    grid: &Grid,
    length: usize,
    tau: &[BigRational],
) -> Result<(CellIndex, Vec<BigRational>)> {
    grid.check_model(model)?;
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    if tau.len() != grid.stat_dim() {
        return Err(Error::InvalidArgument(format!(
            "statistic has {} components, grid has {}",
            tau.len(),
            grid.stat_dim()
        )));
    }
    let side = &grid.width / BigRational::from_integer(length.into());
    let half = BigRational::new(1.into(), 2.into());
    let mut idx = Vec::with_capacity(tau.len());
    let mut center = Vec::with_capacity(tau.len());
    for (t, o) in tau.iter().zip(&grid.origin) {
        // j = ceil((t - o) / side) - 1 puts t in (o + j side, o + (j + 1) side].
        let j = ((t - o) / &side).ceil() - BigRational::one();
        let j_int = j.to_integer();
        center.push(o + (&j + &half) * &side);
        idx.push(
            j_int
                .to_i64()
                .ok_or_else(|| Error::InvalidArgument("cell index overflows i64".into()))?,
        );
    }
    Ok((CellIndex { length, idx }, center))
}

/// Integer image of the letter statistics and grid under a common denominator.
#[derive(Clone, Debug)]
pub struct Lattice {
    tau: Vec<Vec<i64>>,
    width: i64,
    origin: Vec<i64>,
}

impl Lattice {
    pub fn new(model: &ExpFamilyModel, grid: &Grid) -> Result<Self> {
        grid.check_model(model)?;
        let mut denom = grid.width.denom().clone();
        for o in &grid.origin {
            denom = denom.lcm(o.denom());
        }
        for x in 0..model.alphabet_size() {
            for t in model.tau(x) {
                denom = denom.lcm(t.denom());
            }
        }
        let scale = |value: &BigRational| -> Result<i64> {
            let scaled = value * BigRational::from_integer(denom.clone());
            scaled
                .to_integer()
                .to_i64()
                .filter(|v| v.unsigned_abs() < 1 << 40)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "rational {} is too large for the integer lattice",
                        format_rational(value)
                    ))
                })
        };
        let tau = (0..model.alphabet_size())
            .map(|x| model.tau(x).iter().map(scale).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Lattice {
            tau,
            width: scale(&grid.width)?,
            origin: grid.origin.iter().map(scale).collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn stat_dim(&self) -> usize {
        self.origin.len()
    }

    /// Scaled statistic of one letter.
    pub fn letter_stat(&self, letter: usize) -> &[i64] {
        &self.tau[letter]
    }

    /// Scaled statistic sum of a letter composition.
    pub fn stat_sum(&self, counts: &[u64]) -> Vec<i64> {
        let mut sum = vec![0i64; self.stat_dim()];
        for (&c, t) in counts.iter().zip(&self.tau) {
            if c > 0 {
                for (s, &v) in sum.iter_mut().zip(t) {
                    *s += c as i64 * v;
                }
            }
        }
        sum
    }

    /// Cell index of a scaled statistic sum at `length`.
    pub fn cell_idx(&self, length: usize, stat_sum: &[i64]) -> Vec<i64> {
        stat_sum
            .iter()
            .zip(&self.origin)
            .map(|(&s, &o)| Integer::div_ceil(&(s - o * length as i64), &self.width) - 1)
            .collect()
    }
}

/// Memoized size of one occupied quantized type class.
#[derive(Clone, Debug, PartialEq)]
pub struct CellEntry {
    pub size: BigUint,
    pub log2: f64,
}

#[derive(Clone, Debug, Default)]
struct LevelTable {
    cells: HashMap<Vec<i64>, CellEntry>,
}

/// Exact quantized-type-class sizes, memoized per length.
///
/// A length is counted all at once the first time any of its cells is asked
/// for, by enumerating letter compositions and summing multinomials.
#[derive(Clone, Debug)]
pub struct TypeCounter {
    lattice: Lattice,
    alphabet_size: usize,
    composition_cap: u128,
    levels: Vec<Option<LevelTable>>,
    pascal: Vec<Vec<BigUint>>,
}

impl TypeCounter {
    pub fn new(model: &ExpFamilyModel, grid: &Grid) -> Result<Self> {
        Ok(TypeCounter {
            lattice: Lattice::new(model, grid)?,
            alphabet_size: model.alphabet_size(),
            composition_cap: DEFAULT_COMPOSITION_CAP,
            levels: Vec::new(),
            pascal: vec![vec![BigUint::one()]],
        })
    }

    pub fn with_composition_cap(mut self, cap: u128) -> Self {
        self.composition_cap = cap;
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cell_index(&self, length: usize, stat_sum: &[i64]) -> CellIndex {
        CellIndex {
            length,
            idx: self.lattice.cell_idx(length, stat_sum),
        }
    }

    /// Counts every cell at `length` if that has not happened yet.
    pub fn ensure_level(&mut self, length: usize) -> Result<()> {
        if length == 0 {
            return Err(Error::InvalidArgument("length must be at least 1".into()));
        }
        if self.levels.len() <= length {
            self.levels.resize(length + 1, None);
        }
        if self.levels[length].is_some() {
            return Ok(());
        }
        let compositions = composition_count(length, self.alphabet_size);
        if compositions > self.composition_cap {
            return Err(Error::CountingCap {
                length,
                compositions,
                cap: self.composition_cap,
            });
        }
        self.extend_pascal(length);
        let mut sizes: HashMap<Vec<i64>, BigUint> = HashMap::new();
        let lattice = &self.lattice;
        let pascal = &self.pascal;
        for_each_composition(self.alphabet_size, length as u64, |counts| {
            let sum = lattice.stat_sum(counts);
            let idx = lattice.cell_idx(length, &sum);
            let mut multinomial = BigUint::one();
            let mut remaining = length;
            for &c in &counts[..counts.len() - 1] {
                multinomial *= &pascal[remaining][c as usize];
                remaining -= c as usize;
            }
            *sizes.entry(idx).or_insert_with(BigUint::zero) += multinomial;
        });
        let cells = sizes
            .into_iter()
            .map(|(idx, size)| {
                let log2 = big_log2(&size);
                (idx, CellEntry { size, log2 })
            })
            .collect();
        self.levels[length] = Some(LevelTable { cells });
        Ok(())
    }

    fn extend_pascal(&mut self, length: usize) {
        while self.pascal.len() <= length {
            let prev = self.pascal.last().expect("pascal has row 0");
            let n = self.pascal.len();
            let mut row = Vec::with_capacity(n + 1);
            row.push(BigUint::one());
            for i in 1..n {
                row.push(&prev[i - 1] + &prev[i]);
            }
            row.push(BigUint::one());
            self.pascal.push(row);
        }
    }

    /// Entry of the cell holding the scaled statistic sum `stat_sum` at `length`.
    pub fn entry(&mut self, length: usize, stat_sum: &[i64]) -> Result<&CellEntry> {
        self.ensure_level(length)?;
        let idx = self.lattice.cell_idx(length, stat_sum);
        self.levels[length]
            .as_ref()
            .and_then(|level| level.cells.get(&idx))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "statistic sum {stat_sum:?} is not realizable at length {length}"
                ))
            })
    }

    /// `|T_{x^l}|` for a nonempty sequence.
    pub fn sequence_entry(&mut self, seq: &[u8]) -> Result<&CellEntry> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(&bad) = seq.iter().find(|&&x| usize::from(x) >= self.alphabet_size) {
            return Err(Error::InvalidLetter {
                letter: bad.into(),
                alphabet_size: self.alphabet_size,
            });
        }
        let sum = self
            .lattice
            .stat_sum(&letter_counts(seq, self.alphabet_size));
        self.entry(seq.len(), &sum)
    }

    /// Exact size of a quantized type class; zero for a cell no sequence reaches.
    pub fn type_class_size(&mut self, key: &TypeClassKey) -> Result<BigUint> {
        let length = key.cell.length;
        self.ensure_level(length)?;
        Ok(self.levels[length]
            .as_ref()
            .and_then(|level| level.cells.get(&key.cell.idx))
            .map(|e| e.size.clone())
            .unwrap_or_default())
    }

    /// All occupied cells at `length`, sorted by index.
    pub fn level_cells(&mut self, length: usize) -> Result<Vec<(CellIndex, CellEntry)>> {
        self.ensure_level(length)?;
        let level = self.levels[length].as_ref().expect("level was counted");
        let mut cells: Vec<_> = level
            .cells
            .iter()
            .map(|(idx, e)| {
                (
                    CellIndex {
                        length,
                        idx: idx.clone(),
                    },
                    e.clone(),
                )
            })
            .collect();
        cells.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(cells)
    }
}

/// Number of compositions of `length` into `parts` nonnegative parts.
pub fn composition_count(length: usize, parts: usize) -> u128 {
    // C(length + parts - 1, parts - 1), saturating.
    let mut acc: u128 = 1;
    for i in 1..parts as u128 {
        acc = match acc.checked_mul(length as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `visit` with every composition `(n_0, ..., n_{k-1})` of `length`.
pub fn for_each_composition(parts: usize, length: u64, mut visit: impl FnMut(&[u64])) {
    fn rec(counts: &mut Vec<u64>, pos: usize, remaining: u64, visit: &mut dyn FnMut(&[u64])) {
        if pos + 1 == counts.len() {
            counts[pos] = remaining;
            visit(counts);
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            rec(counts, pos + 1, remaining - c, visit);
        }
    }
    let mut counts = vec![0u64; parts];
    rec(&mut counts, 0, length, &mut visit);
}

/// `log2` of a big integer, accurate to double precision.
pub fn big_log2(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return value.to_f64().expect("fits in f64").log2();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_f64().expect("64-bit value");
    top.log2() + shift as f64
}

/// `-log2 p_{theta_hat(x^l)}(x^l) - (d/2) log2 l`.
pub fn log_type_size_core(model: &ExpFamilyModel, seq: &[u8]) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::InvalidArgument(
            "the type-size core is defined for lengths of at least 2".into(),
        ));
    }
    let d = model.stat_dim() as f64;
    Ok(model.ml_codelength(seq)? - 0.5 * d * (seq.len() as f64).log2())
}

/// Growth of the maximum-likelihood code length when `letter` is appended.
pub fn info_increment(model: &ExpFamilyModel, seq: &[u8], letter: u8) -> Result<f64> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    model.check_letter(letter)?;
    let mut longer = seq.to_vec();
    longer.push(letter);
    Ok(model.ml_codelength(&longer)? - model.ml_codelength(seq)?)
}

/// Number of cells at `length` holding some sequence whose maximum-likelihood
/// code length lies in `(gamma + (d/2) log2 l - hi_slack, gamma + (d/2) log2 l - lo_slack)`.
pub fn band_cell_count(
    model: &ExpFamilyModel,
    grid: &Grid,
    length: usize,
    gamma: f64,
    lo_slack: f64,
    hi_slack: f64,
) -> Result<u64> {
    if length < 2 {
        return Err(Error::InvalidArgument("band counting needs length at least 2".into()));
    }
    let lattice = Lattice::new(model, grid)?;
    let center = gamma + 0.5 * model.stat_dim() as f64 * (length as f64).log2();
    let (lo, hi) = (center - hi_slack, center - lo_slack);
    let mut hits: HashMap<Vec<i64>, ()> = HashMap::new();
    let mut failure = None;
    for_each_composition(model.alphabet_size(), length as u64, |counts| {
        if failure.is_some() {
            return;
        }
        let idx = lattice.cell_idx(length, &lattice.stat_sum(counts));
        if hits.contains_key(&idx) {
            return;
        }
        match model.ml_codelength_counts(counts) {
            Ok(len) if len > lo && len < hi => {
                hits.insert(idx, ());
            }
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(hits.len() as u64),
    }
}

/// Exact rational statistic sum scaled back, for reporting.
pub fn lattice_center(grid: &Grid, cell: &CellIndex) -> Vec<BigRational> {
    let side = grid.width() / BigRational::from_integer(cell.length.into());
    cell.idx
        .iter()
        .zip(grid.origin())
        .map(|(&j, o)| o + (BigRational::from_integer(BigInt::from(j)) + BigRational::new(1.into(), 2.into())) * &side)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(text: &str) -> BigRational {
        parse_rational(text).unwrap()
    }

    fn binary() -> (ExpFamilyModel, Grid) {
        (ExpFamilyModel::bernoulli(), Grid::standard(1))
    }

    fn all_sequences(k: u8, length: usize) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        for _ in 0..length {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..k).map(move |a| {
                        let mut t = s.clone();
                        t.push(a);
                        t
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn cell_of_examples() {
        let (m, g) = binary();
        let (cell, center) = cell_of(&m, &g, 4, &[r("1/2")]).unwrap();
        assert_eq!(cell.idx, vec![1]);
        assert_eq!(center, vec![r("3/8")]);

        let (cell, _) = cell_of(&m, &g, 4, &[r("1/4")]).unwrap();
        assert_eq!(cell.idx, vec![0], "upper boundary belongs to the lower cell");

        let (cell, center) = cell_of(&m, &g, 1, &[r("1")]).unwrap();
        assert_eq!(cell.idx, vec![0]);
        assert_eq!(center, vec![r("1/2")]);
        assert_eq!(lattice_center(&g, &cell), center);
    }

    #[test]
    fn lattice_agrees_with_rational_cells() {
        let m = ExpFamilyModel::ternary();
        let g = Grid::new(r("3/2"), vec![r("-1/3")]).unwrap();
        let lattice = Lattice::new(&m, &g).unwrap();
        for length in 1..8 {
            for seq in all_sequences(3, length) {
                let counts = letter_counts(&seq, 3);
                let exact = cell_of(&m, &g, length, &m.suff_stat_avg(&seq).unwrap()).unwrap().0;
                assert_eq!(lattice.cell_idx(length, &lattice.stat_sum(&counts)), exact.idx);
            }
        }
    }

    #[test]
    fn type_class_size_examples() {
        let (m, g) = binary();
        let mut counter = TypeCounter::new(&m, &g).unwrap();
        let key = |j| TypeClassKey::from(CellIndex { length: 4, idx: vec![j] });
        assert_eq!(counter.type_class_size(&key(1)).unwrap(), BigUint::from(6u32));
        assert_eq!(counter.type_class_size(&key(3)).unwrap(), BigUint::from(1u32));
        let total: BigUint = counter.level_cells(4).unwrap().into_iter().map(|(_, e)| e.size).sum();
        assert_eq!(total, BigUint::from(16u32));
        assert_eq!(counter.type_class_size(&key(9)).unwrap(), BigUint::zero());
    }

    #[test]
    fn counting_cap_is_enforced() {
        let m = ExpFamilyModel::quaternary();
        let mut counter = TypeCounter::new(&m, &Grid::standard(2)).unwrap().with_composition_cap(100);
        assert!(counter.ensure_level(4).is_ok());
        assert!(matches!(counter.ensure_level(20), Err(Error::CountingCap { .. })));
    }

    #[test]
    fn counts_match_brute_force_on_a_coarse_grid() {
        let m = ExpFamilyModel::ternary();
        let g = Grid::with_width(r("5/2"), 1).unwrap();
        let mut counter = TypeCounter::new(&m, &g).unwrap();
        for length in 1..=6 {
            let mut brute: HashMap<Vec<i64>, u64> = HashMap::new();
            for seq in all_sequences(3, length) {
                let cell = cell_of(&m, &g, length, &m.suff_stat_avg(&seq).unwrap()).unwrap().0;
                *brute.entry(cell.idx).or_default() += 1;
            }
            let cells = counter.level_cells(length).unwrap();
            assert_eq!(cells.len(), brute.len());
            for (cell, entry) in cells {
                assert_eq!(entry.size, BigUint::from(brute[&cell.idx]));
            }
        }
    }

    #[test]
    fn big_log2_is_accurate() {
        let v = BigUint::one() << 2000u32;
        assert_eq!(big_log2(&v), 2000.0);
        assert!((big_log2(&(BigUint::from(3u32) << 1500u32)) - (1500.0 + 3f64.log2())).abs() < 1e-9);
        assert_eq!(big_log2(&BigUint::from(8u32)), 3.0);
    }

    #[test]
    fn core_examples() {
        let (m, _) = binary();
        let core = log_type_size_core(&m, &[1, 0, 1, 0]).unwrap();
        assert!((core - 3.0).abs() < 1e-9);
        assert!(((6f64.log2() - core).abs() - 0.415).abs() < 1e-3);

        // tau = 1 sits on the hull boundary; the estimate clamps to theta = 3.
        let core = log_type_size_core(&m, &[1, 1, 1, 1]).unwrap();
        let expected = -4.0 * (8f64 / 9.0).log2() - 1.0;
        assert!((core - expected).abs() < 1e-9);
        assert!(log_type_size_core(&m, &[1]).is_err());
    }

    #[test]
    fn increment_examples() {
        let (m, _) = binary();
        let h = |p: f64| -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        let inc = info_increment(&m, &[1, 0], 1).unwrap();
        assert!((inc - (3.0 * h(2.0 / 3.0) - 2.0)).abs() < 1e-9);
        assert!((inc - 0.75489).abs() < 1e-5);

        let ones = vec![1u8; 20];
        let a = info_increment(&m, &ones, 1).unwrap();
        let b = info_increment(&m, &ones[..10], 1).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!((a + (8f64 / 9.0).log2()).abs() < 1e-9);
    }

    #[test]
    fn band_examples() {
        let (m, g) = binary();
        assert_eq!(band_cell_count(&m, &g, 8, -50.0, 0.0, 1.0).unwrap(), 0);
        let all = band_cell_count(&m, &g, 8, 0.0, -100.0, 100.0).unwrap();
        assert_eq!(all, 9);
    }

    #[test]
    fn composition_counts() {
        assert_eq!(composition_count(10, 2), 11);
        assert_eq!(composition_count(4, 3), 15);
        let mut seen = 0;
        for_each_composition(4, 5, |c| {
            assert_eq!(c.iter().sum::<u64>(), 5);
            seen += 1;
        });
        assert_eq!(seen as u128, composition_count(5, 4));
    }

    #[test]
    fn grid_spec_round_trip() {
        let g = Grid::new(r("3/2"), vec![r("-1/4"), r("0")]).unwrap();
        let spec = g.to_spec();
        assert_eq!(spec.width, "3/2");
        assert_eq!(spec.origin, vec!["-1/4".to_string(), "0/1".to_string()]);
        assert_eq!(Grid::from_spec(&spec).unwrap(), g);
        assert!(Grid::new(r("0"), vec![r("0")]).is_err());
    }
}
