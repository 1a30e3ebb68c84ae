use serde::{Deserialize, Serialize};

use super::synth::{quadratic_mean, quadratic_noise_std};
use crate::data::{standardize_fit, Dataset};
use crate::error::Result;
use crate::model::MveNetwork;
use crate::seed::derive_seed;
use crate::train::{train, RegMode, Strategy, TrainConfig};

/// Settings for the variance-regularization sweep on the quadratic data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSettings {
    /// L2 constant of the mean head, shared by every panel.
    pub lambda_mean: f64,
    /// One panel per variance constant, strongest first by convention.
    pub lambda_vars: Vec<f64>,
    pub epochs_per_stage: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Number of evaluation points on [-1, 1].
    pub grid_points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            lambda_mean: 0.1,
            lambda_vars: vec![0.1, 0.04, 0.01, 0.0],
            epochs_per_stage: 1000,
            batch_size: 32,
            hidden: vec![40, 20],
            seed: 0,
            grid_points: 201,
        }
    }
}

/// Plot-ready fitted curve on a dense grid: predicted mean and stdev in
/// original units, next to the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitCurve {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub stdev: Vec<f64>,
    pub true_mean: Vec<f64>,
    pub true_stdev: Vec<f64>,
}

/// Fit summary of one panel of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPanel {
    pub lambda_var: f64,
    /// RMSE of the fitted mean against the true mean on the grid.
    pub mean_rmse_vs_truth: f64,
    /// max / min of the fitted variance over the grid; near 1 means the
    /// heteroscedastic shape was not learned.
    pub variance_ratio: f64,
    /// Fitted vs true stdev at x in {-1, 0, 1}.
    pub stdev_probes: Vec<(f64, f64, f64)>,
    pub curve: FitCurve,
}

/// Trains one network per variance constant, all without warm-up and with the
/// same mean regularization, and summarizes how well each one recovered the
/// true mean and noise profile.
pub fn regularization_sweep(data: &Dataset, settings: &SweepSettings) -> Result<Vec<SweepPanel>> {
    let stats = standardize_fit(data)?;
    let standardized = stats.apply(data)?;
    let mut panels = Vec::with_capacity(settings.lambda_vars.len());
    for (idx, &lambda_var) in settings.lambda_vars.iter().enumerate() {
        let cfg = TrainConfig {
            strategy: Strategy::NoWarmup,
            reg_mode: RegMode::Separate,
            lambda_mean: settings.lambda_mean,
            lambda_var,
            epochs_per_stage: settings.epochs_per_stage,
            batch_size: settings.batch_size,
            seed: derive_seed(settings.seed, &[idx as u64]),
            ..TrainConfig::default()
        };
        let net = MveNetwork::init(
            1,
            &settings.hidden,
            derive_seed(settings.seed, &[idx as u64, 1]),
            1.0,
            1e-6,
        )?;
        let (trained, _) = train(net, &standardized, &cfg)?;

        let m = settings.grid_points.max(2);
        let mut curve = FitCurve {
            x: Vec::with_capacity(m),
            mean: Vec::with_capacity(m),
            stdev: Vec::with_capacity(m),
            true_mean: Vec::with_capacity(m),
            true_stdev: Vec::with_capacity(m),
        };
        let mut sq_err = 0.0;
        let mut var_min = f64::INFINITY;
        let mut var_max = f64::NEG_INFINITY;
        for i in 0..m {
            let x = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
            let p = trained.predict(&stats.apply_row(&[x]))?;
            let mu = stats.destandardize_mean(p.mean);
            let var = stats.destandardize_variance(p.variance);
            sq_err += (mu - quadratic_mean(x)) * (mu - quadratic_mean(x));
            var_min = var_min.min(var);
            var_max = var_max.max(var);
            curve.x.push(x);
            curve.mean.push(mu);
            curve.stdev.push(var.sqrt());
            curve.true_mean.push(quadratic_mean(x));
            curve.true_stdev.push(quadratic_noise_std(x));
        }
        let stdev_probes = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&x| {
                let p = trained.predict(&stats.apply_row(&[x]))?;
                Ok((
                    x,
                    stats.destandardize_variance(p.variance).sqrt(),
                    quadratic_noise_std(x),
                ))
            })
            .collect::<Result<Vec<_>>>()?;

        panels.push(SweepPanel {
            lambda_var,
            mean_rmse_vs_truth: (sq_err / m as f64).sqrt(),
            variance_ratio: var_max / var_min,
            stdev_probes,
            curve,
        });
    }
    Ok(panels)
}
