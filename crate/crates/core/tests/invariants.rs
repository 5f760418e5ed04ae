//! Exhaustive and seeded checks of construction and evaluation invariants.

use tcvf::dictionary::{build_tc_dictionary, build_tunstall, size_bound_chain, Dictionary, SizeThreshold, TcBuilder};
use tcvf::eval::{eps_coding_rate, exact_rate_distribution, monte_carlo_rate, RateConvention};
use tcvf::models::{bernoulli_theta, ExpFamilyModel, Sequence};
use tcvf::qtypes::{Grid, TypeCounter};

fn all_sequences(k: u8, len: usize) -> Vec<Vec<u8>> {
    (0..(k as usize).pow(len as u32))
        .map(|mut code| {
            let mut s = vec![0u8; len];
            for slot in s.iter_mut().rev() {
                *slot = (code % k as usize) as u8;
                code /= k as usize;
            }
            s
        })
        .collect()
}

#[test]
fn class_size_grows_along_binary_paths() {
    let model = ExpFamilyModel::bernoulli();
    let mut counter = TypeCounter::new(&model, &Grid::standard(1)).unwrap();
    let mut violations = Vec::new();
    for len in 1..=9 {
        for seq in all_sequences(2, len) {
            let here = counter.sequence_entry(&seq).unwrap().size.clone();
            for a in 0..2u8 {
                let mut next = seq.clone();
                next.push(a);
                if counter.sequence_entry(&next).unwrap().size < here {
                    violations.push(next);
                }
            }
        }
    }
    assert!(violations.is_empty(), "{violations:?}");
}

#[test]
fn size_bound_chain_holds_per_build() {
    for model in [ExpFamilyModel::bernoulli(), ExpFamilyModel::ternary(), ExpFamilyModel::quaternary()] {
        let grid = Grid::standard(model.stat_dim());
        let mut builder = TcBuilder::new(&model, &grid).unwrap();
        for m in [16u64, 256, 4096] {
            let choice = builder.choose_gamma(m).unwrap();
            let dict = &choice.dictionary;
            let chain = size_bound_chain(
                model.alphabet_size(),
                model.stat_dim(),
                choice.gamma.max(0.0),
                dict.max_segment_length(),
            );
            assert!(dict.size() as f64 <= chain, "{} M={m}: {} > {chain}", model.name(), dict.size());
            assert_eq!(choice.stats.leaves, dict.size() as u64);
        }
    }
}

#[test]
fn builds_are_byte_identical() {
    let model = ExpFamilyModel::ternary();
    let a = build_tc_dictionary(&model, &Grid::standard(1), 6.5, 1 << 16).unwrap().to_text();
    let b = build_tc_dictionary(&model, &Grid::standard(1), 6.5, 1 << 16).unwrap().to_text();
    assert_eq!(a, b);
    let c = TcBuilder::new(&model, &Grid::standard(1)).unwrap().choose_gamma(500).unwrap();
    let d = TcBuilder::new(&model, &Grid::standard(1)).unwrap().choose_gamma(500).unwrap();
    assert_eq!(c.dictionary.to_text(), d.dictionary.to_text());
}

/// On sampled streams, the parse ends exactly at the first prefix whose
/// class crosses the threshold (or at the depth cap).
#[test]
fn parses_end_at_first_crossing() {
    for model in [ExpFamilyModel::bernoulli(), ExpFamilyModel::ternary()] {
        let grid = Grid::standard(1);
        let dict = TcBuilder::new(&model, &grid).unwrap().choose_gamma(2000).unwrap().dictionary;
        let threshold = SizeThreshold::from_bound(dict.meta().size_bound.clone().unwrap());
        let cap = dict.meta().depth_cap.unwrap();
        let mut counter = TypeCounter::new(&model, &grid).unwrap();
        let theta = model.box_center();
        let mut stream = model.letter_sampler(&theta, 11);
        for _ in 0..3000 {
            let parsed = dict.parse_one(&mut stream).unwrap();
            let seg = dict.decode(parsed.index).unwrap();
            let crossings: Vec<bool> = (1..=seg.len())
                .map(|l| threshold.crosses(&counter.sequence_entry(&seg[..l]).unwrap().size))
                .collect();
            assert!(crossings[..seg.len() - 1].iter().all(|c| !c), "early crossing in {seg}");
            assert!(crossings[seg.len() - 1] || seg.len() == cap, "no crossing at the end of {seg}");
        }
    }
}

#[test]
fn monte_carlo_lengths_match_exact_law() {
    let model = ExpFamilyModel::bernoulli();
    let dict = TcBuilder::new(&model, &Grid::standard(1)).unwrap().choose_gamma(256).unwrap().dictionary;
    let theta = [bernoulli_theta(0.3)];
    let exact = exact_rate_distribution(&dict, &theta, RateConvention::TargetSize);
    assert!((exact.total_mass() - 1.0).abs() < 1e-12);
    let n = 100_000u64;
    let (_, empirical) = monte_carlo_rate(&dict, &theta, 0.1, n, 4, RateConvention::TargetSize).unwrap();
    for (&len, &p) in &exact.entries {
        let q = empirical.entries.get(&len).copied().unwrap_or(0.0);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        // One count of continuity slack for lengths with tiny expected counts.
        assert!((q - p).abs() <= 4.0 * sd + 1.0 / n as f64, "length {len}: {q} vs {p}");
    }
}

/// The exact rate falls inside the Monte Carlo interval in at least 95 of
/// 100 independent repetitions.
#[test]
fn monte_carlo_interval_covers_exact_rate() {
    let binary = ExpFamilyModel::bernoulli();
    let ternary = ExpFamilyModel::ternary();
    let cases: Vec<(Dictionary, Vec<f64>)> = vec![
        (
            Dictionary::from_segments(
                &binary,
                &[vec![0u8, 0], vec![0, 1], vec![1]].into_iter().map(Sequence::new).collect::<Vec<_>>(),
                3,
            )
            .unwrap(),
            vec![bernoulli_theta(0.3)],
        ),
        (
            TcBuilder::new(&binary, &Grid::standard(1)).unwrap().choose_gamma(1024).unwrap().dictionary,
            vec![bernoulli_theta(0.2)],
        ),
        (
            build_tunstall(&ternary, &ternary.param(&[0.5]).unwrap(), 200).unwrap(),
            vec![0.5],
        ),
    ];
    for (dict, theta) in &cases {
        let exact = eps_coding_rate(&exact_rate_distribution(dict, theta, RateConvention::TargetSize), 0.1)
            .unwrap()
            .rate;
        let covered = (0..100u64)
            .filter(|&rep| {
                monte_carlo_rate(dict, theta, 0.1, 100_000, rep, RateConvention::TargetSize)
                    .unwrap()
                    .0
                    .covers(exact)
            })
            .count();
        assert!(covered >= 95, "{covered}/100 for a dictionary of size {}", dict.size());
    }
}

#[test]
fn overflow_identity_on_a_tc_dictionary() {
    let model = ExpFamilyModel::ternary();
    let dict = TcBuilder::new(&model, &Grid::standard(1)).unwrap().choose_gamma(3000).unwrap().dictionary;
    let dist = exact_rate_distribution(&dict, &[0.7], RateConvention::TargetSize);
    for &len in dist.entries.keys() {
        let rate = dist.rate_of_length(len);
        let longer: f64 = dist.entries.range(len + 1..).map(|(_, p)| p).sum();
        assert!((dist.overflow_probability(rate) - (1.0 - longer)).abs() < 1e-12);
    }
}

#[test]
fn literal_rule_mismatches_are_reported() {
    let model = ExpFamilyModel::bernoulli();
    let choice = TcBuilder::new(&model, &Grid::standard(1)).unwrap().choose_gamma(4096).unwrap();
    // Binary classes never shrink along a path, so only capped leaves can
    // disagree with the literal rule.
    assert_eq!(choice.stats.monotonicity_violations, 0);
    assert_eq!(choice.stats.literal_mismatches, choice.stats.forced_leaves);
    assert!(choice.dictionary.size() as u64 <= 4096);
}
