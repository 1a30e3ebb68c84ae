//! Synthetic demonstrations and the nested cross-validation harness.
//!
//! - [`generate`]: the three synthetic datasets (sine with tiny noise,
//!   heteroscedastic quadratic, and a two-cluster set with one free mean).
//! - [`nll_profile`]: the negative-loglikelihood landscape over a grid of
//!   candidate means for the two-cluster data, with local-minima detection.
//! - [`regularization_sweep`]: four networks trained without warm-up at
//!   decreasing variance regularization on the quadratic data.
//! - [`nested_cv`]: outer folds for evaluation, inner folds for selecting the
//!   regularization constants from a fixed grid, the same splits shared by
//!   every strategy/mode arm, and a paired t-test comparing equal vs separate
//!   regularization per strategy.

mod cv;
mod landscape;
mod sweep;
mod synth;

pub use cv::{
    nested_cv, selected_lambda_report, ArmResult, ComparisonResult, CvPlan, FoldOutcome,
    HarnessSettings, RunSummary, SelectedLambdaRow, DEFAULT_LAMBDA_GRID,
};
pub use landscape::{nll_profile, optimal_cluster_variance, LandscapeProfile};
pub use sweep::{regularization_sweep, FitCurve, SweepPanel, SweepSettings};
pub use synth::{
    generate, quadratic_mean, quadratic_noise_std, sine_mean, SyntheticKind, SyntheticSpec,
    SINE_NOISE_STD,
};

use crate::data::Standardization;
use crate::error::Result;
use crate::model::MveNetwork;

/// Predicted mean and stdev in original units along a 1-D covariate grid.
pub fn predict_curve(
    net: &MveNetwork,
    stats: &Standardization,
    xs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mean = Vec::with_capacity(xs.len());
    let mut stdev = Vec::with_capacity(xs.len());
    for &x in xs {
        let p = net.predict(&stats.apply_row(&[x]))?;
        mean.push(stats.destandardize_mean(p.mean));
        stdev.push(stats.destandardize_variance(p.variance).sqrt());
    }
    Ok((mean, stdev))
}

/// RMSE of the fitted mean against a known true mean function on a grid.
pub fn mean_function_rmse(
    net: &MveNetwork,
    stats: &Standardization,
    xs: &[f64],
    truth: impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut sq = 0.0;
    for &x in xs {
        let p = net.predict(&stats.apply_row(&[x]))?;
        let mu = stats.destandardize_mean(p.mean);
        sq += (mu - truth(x)) * (mu - truth(x));
    }
    Ok((sq / xs.len() as f64).sqrt())
}

/// Evenly spaced grid with `count` points including both endpoints.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "grid needs at least two points");
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}
