//! Subcommand implementations. Each returns `Ok(false)` when a check ran but failed.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::info;
use serde::Serialize;
use tcvf::converse::check_event_equivalence;
use tcvf::dictionary::{
    build_tunstall, ceil_log2, gamma_reference, segment_length_cap, BuildStats, Codeword, Dictionary,
    SizeThreshold, TcBuildOptions, TcBuilder,
};
use tcvf::eval::{
    eps_coding_rate, exact_rate_distribution, monte_carlo_rate, normality_deviation, predicted_rate,
    residual_scale, task_seed, AsymptoticPrediction, NormalityMethod, NormalityReport, RateEstimate,
};

use crate::config::{CommonArgs, ExperimentConfig, DEFAULT_TRIALS};

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Build at this threshold instead of searching for the largest one that fits M.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Where to write the statistics JSON (default: `<out>.stats.json`).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TunstallArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Whitespace-separated letter indices (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Concatenated codeword bits; whitespace is ignored (default: stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Evaluate this dictionary instead of building one per M.
    #[arg(long)]
    pub dict: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConverseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Input lengths to check.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct NormalityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Block lengths.
    #[arg(long = "length", value_delimiter = ',', required = true)]
    pub lengths: Vec<usize>,
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    if let Some(path) = out {
        write_file(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut text = String::new();
            std::io::stdin().read_to_string(&mut text)?;
            Ok(text)
        }
    }
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Dictionary::from_text(&text).with_context(|| format!("loading {}", path.display()))
}

fn stats_path(explicit: Option<&PathBuf>, out: &Path) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".stats.json");
        PathBuf::from(name)
    })
}

/// Explicit parameters, or the center of the box.
fn thetas_or_center(cfg: &ExperimentConfig, model: &tcvf::ExpFamilyModel) -> Result<Vec<Vec<f64>>> {
    if cfg.theta.is_some() {
        cfg.thetas(model)
    } else {
        Ok(vec![model.box_center().into_inner()])
    }
}

#[derive(Serialize)]
struct DictStats {
    kind: &'static str,
    model: String,
    #[serde(rename = "M_target")]
    m_target: u64,
    size: u64,
    codeword_width: u32,
    gamma: Option<f64>,
    gamma_ref: Option<f64>,
    next_gamma: Option<f64>,
    size_bound: Option<String>,
    depth_cap: Option<usize>,
    theta: Option<Vec<f64>>,
    max_segment_length: usize,
    max_length_over_gamma: Option<f64>,
    expected_length: Option<f64>,
    forced_leaves: Option<u64>,
    literal_mismatches: Option<u64>,
    monotonicity_violations: Option<u64>,
    builds: Option<usize>,
    histogram: BTreeMap<usize, u64>,
}

impl DictStats {
    fn of(dict: &Dictionary) -> Self {
        let meta = dict.meta();
        DictStats {
            kind: dict.kind().as_str(),
            model: dict.model().name().to_string(),
            m_target: dict.m_target(),
            size: dict.size() as u64,
            codeword_width: dict.codeword_width(),
            gamma: meta.gamma,
            gamma_ref: None,
            next_gamma: None,
            size_bound: meta.size_bound.as_ref().map(|b| b.to_string()),
            depth_cap: meta.depth_cap,
            theta: meta.theta.clone(),
            max_segment_length: dict.max_segment_length(),
            max_length_over_gamma: meta.gamma.filter(|&g| g > 0.0).map(|g| dict.max_segment_length() as f64 / g),
            expected_length: meta.theta.as_ref().map(|t| dict.expected_length(t)),
            forced_leaves: None,
            literal_mismatches: None,
            monotonicity_violations: None,
            builds: None,
            histogram: dict.segment_length_histogram(),
        }
    }

    fn with_build(mut self, stats: &BuildStats) -> Self {
        self.forced_leaves = Some(stats.forced_leaves);
        self.literal_mismatches = Some(stats.literal_mismatches);
        self.monotonicity_violations = Some(stats.monotonicity_violations);
        self
    }
}

fn save_dictionary(dict: &Dictionary, stats: &DictStats, out: &Path, stats_out: &Path) -> Result<()> {
    write_file(out, &dict.to_text())?;
    emit(stats, Some(stats_out))?;
    info!("wrote {} segments to {}", dict.size(), out.display());
    Ok(())
}

pub fn build_dict(args: &BuildArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let model = cfg.load_model()?;
    let grid = cfg.grid(&model)?;
    let m = cfg.single_m()?;
    let out = cfg.out.clone().context("--out is required")?;
    let mut builder = TcBuilder::new(&model, &grid)?;
    let (dict, stats) = match args.gamma {
        Some(gamma) => {
            let opts = TcBuildOptions {
                leaf_cap: m,
                depth_cap: segment_length_cap(&model, gamma),
            };
            let (dict, build) = builder.build(&SizeThreshold::from_gamma(gamma)?, opts, m)?;
            let mut stats = DictStats::of(&dict).with_build(&build);
            stats.gamma_ref = Some(gamma_reference(model.stat_dim(), m));
            (dict, stats)
        }
        None => {
            let choice = builder.choose_gamma(m)?;
            info!("gamma {} after {} builds", choice.gamma, choice.builds);
            let mut stats = DictStats::of(&choice.dictionary).with_build(&choice.stats);
            stats.gamma_ref = Some(choice.gamma_ref);
            stats.next_gamma = Some(choice.next_gamma());
            stats.builds = Some(choice.builds);
            (choice.dictionary, stats)
        }
    };
    save_dictionary(&dict, &stats, &out, &stats_path(args.stats.as_ref(), &out))?;
    Ok(true)
}

pub fn tunstall(args: &TunstallArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let model = cfg.load_model()?;
    let m = cfg.single_m()?;
    let out = cfg.out.clone().context("--out is required")?;
    let thetas = thetas_or_center(&cfg, &model)?;
    let [theta] = thetas.as_slice() else {
        bail!("tunstall needs exactly one theta, got {}", thetas.len());
    };
    let dict = build_tunstall(&model, &model.param(theta)?, m)?;
    save_dictionary(&dict, &DictStats::of(&dict), &out, &stats_path(args.stats.as_ref(), &out))?;
    Ok(true)
}

#[derive(Serialize)]
struct EncodeReport {
    codeword_width: u32,
    segments: usize,
    indices: Vec<usize>,
    lengths: Vec<usize>,
    codewords: Vec<String>,
    bits: String,
    remainder: Vec<u8>,
}

fn parse_letters(text: &str) -> Result<Vec<u8>> {
    text.split_whitespace()
        .map(|tok| tok.parse::<u8>().with_context(|| format!("bad letter {tok:?}")))
        .collect()
}

pub fn encode(args: &EncodeArgs) -> Result<bool> {
    let dict = load_dictionary(&args.dict)?;
    let letters = parse_letters(&read_input(args.input.as_deref())?)?;
    let encoded = dict.encode(&letters)?;
    let codewords: Vec<String> = encoded.parses.iter().map(|p| p.codeword.to_string()).collect();
    let report = EncodeReport {
        codeword_width: dict.codeword_width(),
        segments: encoded.parses.len(),
        indices: encoded.parses.iter().map(|p| p.index).collect(),
        lengths: encoded.parses.iter().map(|p| p.length).collect(),
        bits: codewords.concat(),
        codewords,
        remainder: encoded.remainder,
    };
    emit(&report, args.out.as_deref())?;
    Ok(true)
}

#[derive(Serialize)]
struct DecodeReport {
    segments: Vec<Vec<u8>>,
    letters: Vec<u8>,
}

pub fn decode(args: &DecodeArgs) -> Result<bool> {
    let dict = load_dictionary(&args.dict)?;
    let bits: String = read_input(args.input.as_deref())?.split_whitespace().collect();
    if let Some(bad) = bits.chars().find(|c| *c != '0' && *c != '1') {
        bail!(tcvf::Error::InvalidArgument(format!("codeword stream contains {bad:?}")));
    }
    let width = dict.codeword_width() as usize;
    if width == 0 || bits.len() % width != 0 {
        bail!(tcvf::Error::InvalidArgument(format!(
            "{} bits is not a whole number of {width}-bit codewords",
            bits.len()
        )));
    }
    let mut segments = Vec::new();
    for chunk in bits.as_bytes().chunks(width) {
        let value = chunk.iter().fold(0u64, |acc, &b| acc << 1 | u64::from(b == b'1'));
        let codeword = Codeword { value, width: width as u32 };
        segments.push(dict.decode_codeword(codeword)?.into_inner());
    }
    let letters = segments.concat();
    emit(&DecodeReport { segments, letters }, args.out.as_deref())?;
    Ok(true)
}

#[derive(Serialize)]
struct EvalPoint {
    model_id: String,
    #[serde(rename = "M")]
    m: u64,
    gamma: Option<f64>,
    dict_size: u64,
    theta: Vec<f64>,
    eps: f64,
    exact: Option<RateEstimate>,
    mc: Option<RateEstimate>,
    prediction: AsymptoticPrediction,
    residual: f64,
    residual_scaled: f64,
}

fn dictionaries(cfg: &ExperimentConfig, dict: Option<&Path>) -> Result<Vec<Dictionary>> {
    if let Some(path) = dict {
        return Ok(vec![load_dictionary(path)?]);
    }
    let model = cfg.load_model()?;
    let grid = cfg.grid(&model)?;
    let mut builder = TcBuilder::new(&model, &grid)?;
    cfg.require_m()?
        .iter()
        .map(|&m| {
            info!("building TC dictionary for M = {m}");
            Ok(builder.choose_gamma(m)?.dictionary)
        })
        .collect()
}

pub fn evaluate(args: &EvaluateArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let dicts = dictionaries(&cfg, args.dict.as_deref())?;
    let epss = cfg.require_eps()?;
    let mode = cfg.prediction_mode();
    let mut points = Vec::new();
    for (di, dict) in dicts.iter().enumerate() {
        let model = dict.model();
        let thetas = thetas_or_center(&cfg, model)?;
        for (ti, theta) in thetas.iter().enumerate() {
            model.param(theta)?;
            let dist = exact_rate_distribution(dict, theta, cfg.rate_convention);
            let (entropy, varentropy) = model.entropy_varentropy(theta);
            for (ei, &eps) in epss.iter().enumerate() {
                let exact = if cfg.exact { Some(eps_coding_rate(&dist, eps)?) } else { None };
                let mc = if cfg.mc {
                    let seed = task_seed(cfg.seed, &[di as u64, ti as u64, ei as u64]);
                    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
                    Some(monte_carlo_rate(dict, theta, eps, trials, seed, cfg.rate_convention)?.0)
                } else {
                    None
                };
                let prediction =
                    predicted_rate(entropy, varentropy.sqrt(), model.stat_dim(), dist.log2_m, eps, mode)?;
                let measured = exact.as_ref().or(mc.as_ref()).expect("one mode enabled").rate;
                let residual = measured - prediction.first - prediction.second;
                points.push(EvalPoint {
                    model_id: model.name().to_string(),
                    m: dict.m_target(),
                    gamma: dict.gamma(),
                    dict_size: dict.size() as u64,
                    theta: theta.clone(),
                    eps,
                    exact,
                    mc,
                    residual,
                    residual_scaled: residual * residual_scale(dist.log2_m),
                    prediction,
                });
            }
        }
    }
    emit(&points, cfg.out.as_deref())?;
    Ok(true)
}

#[derive(Serialize)]
struct ConverseRow {
    kind: &'static str,
    #[serde(rename = "M_target")]
    m_target: u64,
    size: u64,
    n: usize,
    base_width: u32,
    base_width_ideal: f64,
    theta: Vec<f64>,
    exhaustive: bool,
    inputs_checked: u64,
    p_short_segment: f64,
    p_long_codeword: f64,
    passed: bool,
    counterexamples: Vec<Vec<u8>>,
}

pub fn converse_check(args: &ConverseArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let dicts = dictionaries(&cfg, args.dict.as_deref())?;
    let ns: Vec<usize> = if !args.n.is_empty() {
        args.n.clone()
    } else if !cfg.n.is_empty() {
        cfg.n.clone()
    } else {
        bail!(tcvf::Error::InvalidArgument("no input length given (--n or \"n\")".into()));
    };
    let samples = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let mut rows = Vec::new();
    for (di, dict) in dicts.iter().enumerate() {
        let thetas = thetas_or_center(&cfg, dict.model())?;
        let theta = &thetas[0];
        let base_width = ceil_log2(dict.m_target());
        for (ni, &n) in ns.iter().enumerate() {
            let seed = task_seed(cfg.seed, &[di as u64, ni as u64]);
            let report = check_event_equivalence(dict, n, base_width, theta, samples, seed)?;
            if !report.passed() {
                log::warn!("converse check failed for M = {}, n = {n}", dict.m_target());
            }
            rows.push(ConverseRow {
                kind: dict.kind().as_str(),
                m_target: dict.m_target(),
                size: dict.size() as u64,
                n,
                base_width,
                base_width_ideal: (dict.m_target() as f64).log2(),
                theta: theta.clone(),
                exhaustive: report.exhaustive,
                inputs_checked: report.inputs_checked,
                p_short_segment: report.p_short_segment,
                p_long_codeword: report.p_long_codeword,
                passed: report.passed(),
                counterexamples: report.counterexamples.iter().map(|s| s.letters().to_vec()).collect(),
            });
        }
    }
    emit(&rows, cfg.out.as_deref())?;
    Ok(rows.iter().all(|r| r.passed))
}

#[derive(Serialize)]
struct NormalityRow {
    theta: Vec<f64>,
    #[serde(flatten)]
    report: NormalityReport,
}

pub fn normality(args: &NormalityArgs) -> Result<bool> {
    let cfg = args.common.resolve()?;
    let model = cfg.load_model()?;
    let thetas = thetas_or_center(&cfg, &model)?;
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let mut rows = Vec::new();
    for (ti, theta) in thetas.iter().enumerate() {
        for (li, &length) in args.lengths.iter().enumerate() {
            let seed = task_seed(cfg.seed, &[ti as u64, li as u64]);
            let method = if args.common.exact {
                NormalityMethod::Exact
            } else if cfg.mc {
                NormalityMethod::MonteCarlo { trials, seed }
            } else {
                NormalityMethod::Auto { trials, seed }
            };
            let report = normality_deviation(&model, theta, length, &[], method)?;
            rows.push(NormalityRow { theta: theta.clone(), report });
        }
    }
    emit(&rows, cfg.out.as_deref())?;
    Ok(true)
}
