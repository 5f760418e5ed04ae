//! Epsilon-coding rates, asymptotic predictions and diagnostics.

mod gaussian;
mod normality;
mod predict;
mod rate;
mod sweep;

pub use gaussian::{gaussian_quantile, gaussian_tail};
pub use normality::{normality_deviation, z_grid, NormalityMethod, NormalityReport, DEFAULT_Z_GRID_POINTS};
pub use predict::{predicted_rate, AsymptoticPrediction, IterativeSolution, PredictionMode};
pub use rate::{
    eps_coding_rate, exact_rate_distribution, monte_carlo_rate, RateConvention, RateDistribution,
    RateEstimate, RateMode, codeword_bits,
};
pub use sweep::{
    evaluate_point, interior_grid, residual_scale, sup_residual, task_seed, EvalOptions, SupResidualReport, SweepRow,
};
