use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// The NLL landscape of the two-cluster problem: one shared mean candidate,
/// per-cluster variances set to their conditional optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeProfile {
    pub mu_grid: Vec<f64>,
    pub nll_values: Vec<f64>,
    /// Grid points strictly below both neighbours, as `(mu, nll)`.
    pub local_minima: Vec<(f64, f64)>,
}

/// Profiles the total NLL over candidate means for two-cluster data.
///
/// For each candidate mean, each cluster's variance is set to its maximum
/// likelihood value `mean((y - mu)^2)`, which collapses the cluster's NLL
/// contribution to `(n_k / 2) (ln sigma_k^2 + 1)`. With a small cluster of
/// large spread and a tight cluster far away, the profile has two local
/// minima — the reason joint mean/variance optimization can stall.
pub fn nll_profile(two_cluster_data: &Dataset, mu_grid: &[f64]) -> Result<LandscapeProfile> {
    if mu_grid.is_empty() {
        return Err(Error::config("mu grid must be nonempty"));
    }
    if two_cluster_data.label != "two-cluster" || two_cluster_data.n() % 2 != 0 {
        return Err(Error::config(
            "nll_profile expects a two-cluster dataset (first half cluster one)",
        ));
    }
    let half = two_cluster_data.n() / 2;
    if half == 0 {
        return Err(Error::config("two-cluster dataset is empty"));
    }
    let first = &two_cluster_data.targets()[..half];
    let second = &two_cluster_data.targets()[half..];

    let nll_values: Vec<f64> = mu_grid
        .iter()
        .map(|&mu| cluster_nll(first, mu) + cluster_nll(second, mu))
        .collect();

    let mut local_minima = Vec::new();
    for i in 1..nll_values.len().saturating_sub(1) {
        if nll_values[i] < nll_values[i - 1] && nll_values[i] < nll_values[i + 1] {
            local_minima.push((mu_grid[i], nll_values[i]));
        }
    }
    Ok(LandscapeProfile {
        mu_grid: mu_grid.to_vec(),
        nll_values,
        local_minima,
    })
}

/// One cluster's NLL at its conditionally optimal variance.
fn cluster_nll(targets: &[f64], mu: f64) -> f64 {
    let n = targets.len() as f64;
    let sigma2 = targets.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / n;
    0.5 * n * (sigma2.ln() + 1.0)
}

/// The conditionally optimal variance of one cluster at a candidate mean.
pub fn optimal_cluster_variance(targets: &[f64], mu: f64) -> f64 {
    targets.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / targets.len() as f64
}
