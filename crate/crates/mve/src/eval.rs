//! Metrics, fold aggregation, and the paired t-test.
//!
//! Loglikelihood is reported as the mean per-point log density of the target
//! under the predicted Gaussian, *including* the `-0.5 ln(2 pi)` constant that
//! the training loss omits. By default metrics are mapped back to the original
//! target scale: `mu_orig = mu * s_y + m_y`, `var_orig = var * s_y^2`. The
//! change of variables shifts the log density by exactly `-ln s_y`, which the
//! tests pin down.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::model::MveNetwork;
use crate::special::student_t_quantile;

/// Which scale metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricScale {
    /// De-standardize predictions and evaluate against the raw targets.
    Original,
    /// Evaluate on the standardized scale the network was trained on.
    Standardized,
}

impl MetricScale {
    pub fn name(self) -> &'static str {
        match self {
            MetricScale::Original => "original",
            MetricScale::Standardized => "standardized",
        }
    }
}

/// Mean per-point log density and root-mean-squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loglik: f64,
    pub rmse: f64,
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Evaluates a trained network on a validation split given in original units.
///
/// `standardization` must be the parameters fitted on the corresponding
/// training split; covariates are standardized with them before prediction.
pub fn metrics_on_scale(
    net: &MveNetwork,
    standardization: &Standardization,
    validation: &Dataset,
    scale: MetricScale,
) -> Result<Metrics> {
    if validation.is_empty() {
        return Err(Error::config("cannot evaluate on an empty split"));
    }
    let mut loglik = 0.0;
    let mut sq_err = 0.0;
    for i in 0..validation.n() {
        let x = standardization.apply_row(validation.row(i));
        let p = net.predict(&x)?;
        let (mu, var, y) = match scale {
            MetricScale::Original => (
                standardization.destandardize_mean(p.mean),
                standardization.destandardize_variance(p.variance),
                validation.target(i),
            ),
            MetricScale::Standardized => (
                p.mean,
                p.variance,
                (validation.target(i) - standardization.y_mean) / standardization.y_std,
            ),
        };
        let r = y - mu;
        loglik += -HALF_LN_2PI - 0.5 * var.ln() - 0.5 * r * r / var;
        sq_err += r * r;
    }
    let n = validation.n() as f64;
    Ok(Metrics {
        loglik: loglik / n,
        rmse: (sq_err / n).sqrt(),
    })
}

/// Shorthand for original-scale metrics, the reporting default.
pub fn metrics_on_original_scale(
    net: &MveNetwork,
    standardization: &Standardization,
    validation: &Dataset,
) -> Result<Metrics> {
    metrics_on_scale(net, standardization, validation, MetricScale::Original)
}

/// Mean and standard error (sample stdev / sqrt(k)) of per-fold values.
pub fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::config("aggregation needs at least two folds"));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    Ok((mean, var.sqrt() / k.sqrt()))
}

/// Aggregate of per-fold metrics: `(mean, standard error)` per metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricsAggregate {
    pub loglik_mean: f64,
    pub loglik_se: f64,
    pub rmse_mean: f64,
    pub rmse_se: f64,
}

pub fn aggregate_folds(folds: &[Metrics]) -> Result<MetricsAggregate> {
    let loglik: Vec<f64> = folds.iter().map(|m| m.loglik).collect();
    let rmse: Vec<f64> = folds.iter().map(|m| m.rmse).collect();
    let (loglik_mean, loglik_se) = mean_and_se(&loglik)?;
    let (rmse_mean, rmse_se) = mean_and_se(&rmse)?;
    Ok(MetricsAggregate {
        loglik_mean,
        loglik_se,
        rmse_mean,
        rmse_se,
    })
}

/// Result of a paired two-tailed t-test on per-fold differences.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub mean_difference: f64,
    pub standard_error: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub confidence: f64,
    pub significant: bool,
}

/// Paired two-tailed t-test on the fold-wise differences `a[i] - b[i]`.
///
/// Significant iff `|t| > t_quantile(1 - (1 - confidence)/2, k - 1)`.
/// Zero-variance differences are handled by their limit: a nonzero mean
/// difference that is identical in every fold is deterministic (significant,
/// infinite t); an all-zero difference is not (t = 0).
pub fn paired_t_test(per_fold_a: &[f64], per_fold_b: &[f64], confidence: f64) -> Result<PairedTestResult> {
    if per_fold_a.len() != per_fold_b.len() {
        return Err(Error::config(format!(
            "paired test needs equal-length fold lists, got {} and {}",
            per_fold_a.len(),
            per_fold_b.len()
        )));
    }
    if per_fold_a.len() < 2 {
        return Err(Error::config("paired test needs at least two folds"));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::config("confidence must lie in (0, 1)"));
    }
    let k = per_fold_a.len();
    let d: Vec<f64> = per_fold_a.iter().zip(per_fold_b).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / k as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
    let se = var.sqrt() / (k as f64).sqrt();
    let df = k - 1;
    let critical_value = student_t_quantile(1.0 - (1.0 - confidence) / 2.0, df as f64);

    let (t_statistic, significant) = if se == 0.0 {
        if mean == 0.0 {
            (0.0, false)
        } else {
            (mean.signum() * f64::INFINITY, true)
        }
    } else {
        let t = mean / se;
        (t, t.abs() > critical_value)
    };
    Ok(PairedTestResult {
        mean_difference: mean,
        standard_error: se,
        t_statistic,
        degrees_of_freedom: df,
        critical_value,
        confidence,
        significant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize_fit;
    use crate::model::MveNetwork;
    use crate::nn::WeightInit;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_net_gives_zero_rmse_and_constant_loglik() {
        // Identity standardization, mean head passes the covariate through,
        // variance head outputs exactly 1; targets equal the covariate.
        use crate::nn::{Activation, DenseLayer, Mlp};
        let mean = Mlp::new(
            vec![DenseLayer::new(1, 1, Activation::Linear, vec![1.0], vec![0.0]).unwrap()],
            0.0,
        )
        .unwrap();
        let var = Mlp::new(
            vec![DenseLayer::new(1, 1, Activation::Exp, vec![0.0], vec![0.0]).unwrap()],
            0.0,
        )
        .unwrap();
        let net = MveNetwork::new(mean, var, 1e-6).unwrap();
        let identity = Standardization {
            x_mean: vec![0.0],
            x_std: vec![1.0],
            y_mean: 0.0,
            y_std: 1.0,
        };
        let val = Dataset::new(vec![0.3, -1.0, 2.0], vec![0.3, -1.0, 2.0], 1, "t").unwrap();
        let m = metrics_on_original_scale(&net, &identity, &val).unwrap();
        assert_abs_diff_eq!(m.rmse, 0.0);
        assert_abs_diff_eq!(m.loglik, -HALF_LN_2PI, epsilon = 1e-15);
        // -0.5 ln(2 pi) ~ -0.9189.
        assert_abs_diff_eq!(m.loglik, -0.918_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn identity_standardization_makes_scales_agree() {
        let net = MveNetwork::init(1, &[4], 11, 1.0, 1e-6).unwrap();
        let identity = Standardization {
            x_mean: vec![0.0],
            x_std: vec![1.0],
            y_mean: 0.0,
            y_std: 1.0,
        };
        let val = Dataset::new(vec![0.1, 0.5, -0.4], vec![1.0, 0.2, -0.3], 1, "t").unwrap();
        let a = metrics_on_scale(&net, &identity, &val, MetricScale::Original).unwrap();
        let b = metrics_on_scale(&net, &identity, &val, MetricScale::Standardized).unwrap();
        assert_abs_diff_eq!(a.loglik, b.loglik, epsilon = 1e-14);
        assert_abs_diff_eq!(a.rmse, b.rmse, epsilon = 1e-14);
    }

    /// Independent scalar Gaussian log-density used as an oracle.
    fn gaussian_log_density(y: f64, mu: f64, var: f64) -> f64 {
        let sigma = var.sqrt();
        let z = (y - mu) / sigma;
        (1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt())).ln() - 0.5 * z * z
    }

    #[test]
    fn loglik_matches_independent_density_oracle() {
        let net = MveNetwork::init_with(1, &[3], WeightInit::FanInNormal, 5, 0.7, 1e-6).unwrap();
        let train = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0, 5.0], 1, "t").unwrap();
        let s = standardize_fit(&train).unwrap();
        let val = Dataset::new(vec![0.5, 1.5, 2.5], vec![2.0, 1.0, 4.0], 1, "t").unwrap();
        let m = metrics_on_original_scale(&net, &s, &val).unwrap();
        let mut oracle = 0.0;
        for i in 0..val.n() {
            let p = net.predict(&s.apply_row(val.row(i))).unwrap();
            let mu = p.mean * s.y_std + s.y_mean;
            let var = p.variance * s.y_std * s.y_std;
            oracle += gaussian_log_density(val.target(i), mu, var);
        }
        oracle /= val.n() as f64;
        assert_abs_diff_eq!(m.loglik, oracle, epsilon = 1e-12);
    }

    #[test]
    fn destandardized_loglik_is_shifted_by_ln_y_std() {
        let net = MveNetwork::init(1, &[5], 13, 1.0, 1e-6).unwrap();
        let train = Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![10.0, 30.0, 20.0, 50.0, 40.0],
            1,
            "t",
        )
        .unwrap();
        let s = standardize_fit(&train).unwrap();
        let val = Dataset::new(vec![0.5, 2.5], vec![25.0, 35.0], 1, "t").unwrap();
        let orig = metrics_on_scale(&net, &s, &val, MetricScale::Original).unwrap();
        let std = metrics_on_scale(&net, &s, &val, MetricScale::Standardized).unwrap();
        assert_abs_diff_eq!(orig.loglik, std.loglik - s.y_std.ln(), epsilon = 1e-12);
        // RMSE scales exactly by y_std.
        assert_abs_diff_eq!(orig.rmse, std.rmse * s.y_std, epsilon = 1e-10);
    }

    #[test]
    fn aggregate_hand_values() {
        let (m, se) = mean_and_se(&[1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m, 1.0);
        assert_abs_diff_eq!(se, 0.0);
        // (0, 2): stdev sqrt(2), SE = sqrt(2)/sqrt(2) = 1.
        let (m, se) = mean_and_se(&[0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m, 1.0);
        assert_abs_diff_eq!(se, 1.0, epsilon = 1e-15);
        assert!(mean_and_se(&[1.0]).is_err());
    }

    #[test]
    fn aggregate_matches_direct_recomputation() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (m, se) = mean_and_se(&vals).unwrap();
        let mean = vals.iter().sum::<f64>() / 10.0;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0).sqrt();
        assert_abs_diff_eq!(m, mean, epsilon = 1e-14);
        assert_abs_diff_eq!(se, sd / 10.0_f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn t_test_constant_nonzero_difference_is_significant() {
        let a = vec![1.0; 10];
        let b = vec![0.0; 10];
        let r = paired_t_test(&a, &b, 0.90).unwrap();
        assert!(r.significant);
        assert!(r.t_statistic.is_infinite() && r.t_statistic > 0.0);
        assert_eq!(r.degrees_of_freedom, 9);
    }

    #[test]
    fn t_test_all_zero_differences_not_significant() {
        let a = vec![0.3; 8];
        let r = paired_t_test(&a, &a, 0.90).unwrap();
        assert!(!r.significant);
        assert_eq!(r.t_statistic, 0.0);
    }

    #[test]
    fn t_test_critical_value_df9() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 1.1).collect();
        let r = paired_t_test(&a, &b, 0.90).unwrap();
        assert_abs_diff_eq!(r.critical_value, 1.833, epsilon = 1e-3);
    }

    #[test]
    fn t_test_is_antisymmetric() {
        let a = vec![1.0, 2.5, 0.3, 4.0, 1.1];
        let b = vec![0.8, 2.9, 0.1, 3.2, 1.4];
        let ab = paired_t_test(&a, &b, 0.90).unwrap();
        let ba = paired_t_test(&b, &a, 0.90).unwrap();
        assert_abs_diff_eq!(ab.t_statistic, -ba.t_statistic, epsilon = 1e-12);
        assert_eq!(ab.significant, ba.significant);
    }

    #[test]
    fn se_shrinks_with_fold_count_as_expected() {
        // Duplicating each fold value k -> 2k changes SE by exactly
        // sqrt((k-1)/(2k-1)), approaching 1/sqrt(2).
        let vals = vec![0.4, 1.2, -0.3, 0.9, 0.0, 2.2, 1.5, -1.0, 0.7, 0.2];
        let k = vals.len();
        let mut dup = vals.clone();
        dup.extend_from_slice(&vals);
        let (_, se) = mean_and_se(&vals).unwrap();
        let (_, se_dup) = mean_and_se(&dup).unwrap();
        let expected_ratio = ((k as f64 - 1.0) / (2.0 * k as f64 - 1.0)).sqrt();
        assert_abs_diff_eq!(se_dup / se, expected_ratio, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_fold_lists_rejected() {
        assert!(paired_t_test(&[1.0, 2.0], &[1.0], 0.9).is_err());
        assert!(paired_t_test(&[1.0], &[1.0], 0.9).is_err());
    }
}
