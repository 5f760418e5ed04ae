//! Experiment configuration: a JSON file whose fields can be overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use tcvf::eval::{interior_grid, EvalOptions, PredictionMode, RateConvention};
use tcvf::qtypes::GridSpec;
use tcvf::{ExpFamilyModel, Grid};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_THETA_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionChoice {
    #[default]
    Formula,
    Iterative,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled model name or path to a model JSON file.
    pub model: String,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(rename = "M", default)]
    pub m: Vec<u64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Explicit source parameters; when absent an interior grid of the box is used.
    #[serde(default)]
    pub theta: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub theta_grid_points: Option<usize>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub exact: bool,
    #[serde(default)]
    pub mc: bool,
    #[serde(default)]
    pub prediction: PredictionChoice,
    /// Slack constant of the iterative prediction.
    #[serde(default)]
    pub c: f64,
    /// Input lengths for converse checks.
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub rate_convention: RateConvention,
}

fn default_true() -> bool {
    true
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "bernoulli".into(),
            grid: None,
            m: Vec::new(),
            eps: Vec::new(),
            theta: None,
            theta_grid_points: None,
            trials: None,
            seed: 0,
            out: None,
            exact: true,
            mc: false,
            prediction: PredictionChoice::Formula,
            c: 0.0,
            n: Vec::new(),
            rate_convention: RateConvention::TargetSize,
        }
    }
}

/// Flags shared by the subcommands; each mirrors a config field.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled model name (bernoulli, ternary, quaternary) or model JSON path.
    #[arg(long)]
    pub model: Option<String>,
    /// Cell width of the quantization grid, as "p/q" or an integer.
    #[arg(long = "W")]
    pub width: Option<String>,
    /// Grid origin, one rational per statistic component.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub origin: Option<Vec<String>>,
    /// Target dictionary sizes.
    #[arg(long = "M", value_delimiter = ',')]
    pub m: Option<Vec<u64>>,
    /// Overflow tolerances.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// A natural parameter as comma-separated components; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Vec<String>,
    /// Monte Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (file or directory, depending on the subcommand).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exact evaluation only.
    #[arg(long, conflicts_with = "mc")]
    pub exact: bool,
    /// Monte Carlo evaluation only.
    #[arg(long)]
    pub mc: bool,
    /// Closed-form three-term prediction.
    #[arg(long, conflicts_with = "iterative")]
    pub formula: bool,
    /// Fixed-point prediction.
    #[arg(long)]
    pub iterative: bool,
    /// Slack constant of the fixed-point prediction.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Interior grid points per parameter dimension when no theta is given.
    #[arg(long)]
    pub theta_points: Option<usize>,
    /// Rate numerator: log2 of the target size or the codeword width.
    #[arg(long, value_enum)]
    pub rate_convention: Option<ConventionArg>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum ConventionArg {
    TargetSize,
    CodewordWidth,
}

impl From<ConventionArg> for RateConvention {
    fn from(arg: ConventionArg) -> Self {
        match arg {
            ConventionArg::TargetSize => RateConvention::TargetSize,
            ConventionArg::CodewordWidth => RateConvention::CodewordWidth,
        }
    }
}

fn parse_theta(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad theta component {t:?}")))
        .collect()
}

impl CommonArgs {
    /// The config file (if any) with flag overrides applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(model) = &self.model {
            cfg.model = model.clone();
        }
        if self.width.is_some() || self.origin.is_some() {
            let base = cfg.grid.take();
            let width = self
                .width
                .clone()
                .or_else(|| base.as_ref().map(|g| g.width.clone()))
                .unwrap_or_else(|| "1".into());
            let origin = self.origin.clone().or_else(|| base.map(|g| g.origin)).unwrap_or_default();
            cfg.grid = Some(GridSpec { width, origin });
        }
        if let Some(m) = &self.m {
            cfg.m = m.clone();
        }
        if let Some(eps) = &self.eps {
            cfg.eps = eps.clone();
        }
        if !self.theta.is_empty() {
            cfg.theta = Some(self.theta.iter().map(|t| parse_theta(t)).collect::<Result<_>>()?);
        }
        if let Some(trials) = self.trials {
            cfg.trials = Some(trials);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if self.exact {
            cfg.exact = true;
            cfg.mc = false;
        }
        if self.mc {
            cfg.exact = false;
            cfg.mc = true;
        }
        if self.formula {
            cfg.prediction = PredictionChoice::Formula;
        }
        if self.iterative {
            cfg.prediction = PredictionChoice::Iterative;
        }
        if let Some(c) = self.c {
            cfg.c = c;
        }
        if let Some(points) = self.theta_points {
            cfg.theta_grid_points = Some(points);
        }
        if let Some(convention) = self.rate_convention {
            cfg.rate_convention = convention.into();
        }
        cfg.check()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    fn check(&self) -> Result<()> {
        if self.trials == Some(0) {
            bail!("trials must be at least 1");
        }
        if !self.exact && !self.mc {
            bail!("at least one of exact and mc evaluation must be enabled");
        }
        if let Some(thetas) = &self.theta {
            if thetas.is_empty() {
                bail!("theta list is empty");
            }
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            bail!("every eps must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn load_model(&self) -> Result<ExpFamilyModel> {
        if let Some(model) = ExpFamilyModel::bundled(&self.model) {
            return Ok(model);
        }
        let path = Path::new(&self.model);
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("{:?} is neither a bundled model nor a readable file", self.model))?;
        Ok(ExpFamilyModel::from_json(&text)?)
    }

    pub fn grid(&self, model: &ExpFamilyModel) -> Result<Grid> {
        match &self.grid {
            None => Ok(Grid::standard(model.stat_dim())),
            Some(spec) => {
                let mut spec = spec.clone();
                if spec.origin.is_empty() {
                    spec.origin = vec!["0".into(); model.stat_dim()];
                }
                if spec.origin.len() != model.stat_dim() {
                    bail!("grid origin has {} components, model has {}", spec.origin.len(), model.stat_dim());
                }
                Ok(Grid::from_spec(&spec)?)
            }
        }
    }

    /// Explicit parameters, or the product of interior grids of the box.
    pub fn thetas(&self, model: &ExpFamilyModel) -> Result<Vec<Vec<f64>>> {
        if let Some(thetas) = &self.theta {
            for t in thetas {
                model.param(t)?;
                if t.iter().zip(model.theta_box()).any(|(&v, &(lo, hi))| v < lo || v > hi) {
                    bail!("theta {t:?} lies outside the parameter box");
                }
            }
            return Ok(thetas.clone());
        }
        let points = self.theta_grid_points.unwrap_or(DEFAULT_THETA_POINTS);
        if points == 0 {
            bail!("theta_grid_points must be at least 1");
        }
        let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
        for &(lo, hi) in model.theta_box() {
            let axis = interior_grid(lo, hi, points);
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut t = prefix.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        Ok(grid)
    }

    pub fn require_m(&self) -> Result<&[u64]> {
        if self.m.is_empty() {
            bail!("no dictionary size given (--M or \"M\")");
        }
        Ok(&self.m)
    }

    pub fn single_m(&self) -> Result<u64> {
        match self.require_m()? {
            [m] => Ok(*m),
            list => bail!("expected one dictionary size, got {}", list.len()),
        }
    }

    pub fn require_eps(&self) -> Result<&[f64]> {
        if self.eps.is_empty() {
            bail!("no tolerance given (--eps or \"eps\")");
        }
        Ok(&self.eps)
    }

    pub fn eval_options(&self, seed: u64) -> EvalOptions {
        EvalOptions {
            exact: self.exact,
            mc_trials: self.mc.then(|| self.trials.unwrap_or(DEFAULT_TRIALS)),
            seed,
            convention: self.rate_convention,
        }
    }

    pub fn prediction_mode(&self) -> PredictionMode {
        match self.prediction {
            PredictionChoice::Formula => PredictionMode::Formula,
            PredictionChoice::Iterative => PredictionMode::Iterative { c: self.c },
        }
    }
}
