//! Datasets and standardization.
//!
//! A [`Dataset`] is a dense covariate matrix plus a target vector.
//! Standardization parameters are always fitted on a training split and then
//! applied to both splits, so validation data never leaks into the scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to a column's standard deviation so constant columns
/// standardize to zeros instead of dividing by zero.
pub const STDEV_FLOOR: f64 = 1e-12;

/// A regression dataset: `n` rows of `p` covariates (row-major) and `n`
/// targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    /// Standardization that produced this dataset, when it is a standardized
    /// copy of another one.
    pub standardization: Option<Standardization>,
    /// Provenance label ("sine", "two-cluster", a file name, ...).
    pub label: String,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize, label: impl Into<String>) -> Result<Self> {
        if p == 0 {
            return Err(Error::config("dataset needs at least one covariate column"));
        }
        if x.len() != y.len() * p {
            return Err(Error::config(format!(
                "covariate matrix has {} values, expected {} rows x {} columns",
                x.len(),
                y.len(),
                p
            )));
        }
        Ok(Self {
            n: y.len(),
            p,
            x,
            y,
            standardization: None,
            label: label.into(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn target(&self, i: usize) -> f64 {
        self.y[i]
    }

    #[inline]
    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Copies the selected rows into a new dataset. Indices may repeat.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.p);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            n: idx.len(),
            p: self.p,
            x,
            y,
            standardization: self.standardization.clone(),
            label: self.label.clone(),
        }
    }
}

/// Per-column location/scale for covariates plus the target's mean and
/// standard deviation. Fitted with the sample (n-1) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

/// Fits standardization parameters on a training split.
pub fn standardize_fit(train: &Dataset) -> Result<Standardization> {
    if train.is_empty() {
        return Err(Error::config("cannot standardize an empty dataset"));
    }
    let n = train.n() as f64;
    let p = train.p();
    let mut x_mean = vec![0.0; p];
    for i in 0..train.n() {
        for (m, &v) in x_mean.iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    for m in &mut x_mean {
        *m /= n;
    }
    let mut x_var = vec![0.0; p];
    for i in 0..train.n() {
        for (j, &v) in train.row(i).iter().enumerate() {
            let d = v - x_mean[j];
            x_var[j] += d * d;
        }
    }
    let denom = (n - 1.0).max(1.0);
    let x_std: Vec<f64> = x_var.iter().map(|v| (v / denom).sqrt().max(STDEV_FLOOR)).collect();

    let y_mean = train.targets().iter().sum::<f64>() / n;
    let y_var = train
        .targets()
        .iter()
        .map(|y| (y - y_mean) * (y - y_mean))
        .sum::<f64>()
        / denom;
    let y_std = y_var.sqrt().max(STDEV_FLOOR);

    Ok(Standardization {
        x_mean,
        x_std,
        y_mean,
        y_std,
    })
}

impl Standardization {
    /// Applies the fitted parameters to any split (training or validation).
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.p() != self.x_mean.len() {
            return Err(Error::config(format!(
                "standardization fitted on {} columns, dataset has {}",
                self.x_mean.len(),
                data.p()
            )));
        }
        let mut x = Vec::with_capacity(data.covariates().len());
        for i in 0..data.n() {
            for (j, &v) in data.row(i).iter().enumerate() {
                x.push((v - self.x_mean[j]) / self.x_std[j]);
            }
        }
        let y: Vec<f64> = data
            .targets()
            .iter()
            .map(|&y| (y - self.y_mean) / self.y_std)
            .collect();
        let mut out = Dataset::new(x, y, data.p(), data.label.clone())?;
        out.standardization = Some(self.clone());
        Ok(out)
    }

    /// Standardizes a single covariate vector.
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.x_mean.len(), "row length mismatch");
        row.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.x_mean[j]) / self.x_std[j])
            .collect()
    }

    /// Maps a standardized mean prediction back to original target units.
    #[inline]
    pub fn destandardize_mean(&self, mu: f64) -> f64 {
        mu * self.y_std + self.y_mean
    }

    /// Maps a standardized variance prediction back to original target units.
    #[inline]
    pub fn destandardize_variance(&self, var: f64) -> f64 {
        var * self.y_std * self.y_std
    }

    #[inline]
    pub fn destandardize_target(&self, y: f64) -> f64 {
        y * self.y_std + self.y_mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy(xs: &[f64], ys: &[f64], p: usize) -> Dataset {
        Dataset::new(xs.to_vec(), ys.to_vec(), p, "toy").unwrap()
    }

    #[test]
    fn constant_column_floors_stdev_and_maps_to_zero() {
        let data = toy(&[3.0, 3.0, 3.0, 3.0], &[1.0, 2.0, 3.0, 4.0], 1);
        let s = standardize_fit(&data).unwrap();
        assert_eq!(s.x_std[0], STDEV_FLOOR);
        let out = s.apply(&data).unwrap();
        assert!(out.covariates().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_stdev_and_round_trip() {
        // y = (0, 2): mean 1, sample stdev sqrt(2).
        let data = toy(&[0.0, 2.0], &[0.0, 2.0], 1);
        let s = standardize_fit(&data).unwrap();
        assert_abs_diff_eq!(s.y_mean, 1.0);
        assert_abs_diff_eq!(s.y_std, 2.0_f64.sqrt(), epsilon = 1e-15);
        let out = s.apply(&data).unwrap();
        for (std_y, orig_y) in out.targets().iter().zip(data.targets()) {
            assert_abs_diff_eq!(s.destandardize_target(*std_y), *orig_y, epsilon = 1e-12);
        }
    }

    #[test]
    fn training_split_standardizes_to_zero_mean_unit_stdev() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64) * 0.7 - 3.0).collect();
        let ys: Vec<f64> = (0..40).map(|i| (i as f64).sin() * 5.0 + 2.0).collect();
        let data = toy(&xs, &ys, 1);
        let s = standardize_fit(&data).unwrap();
        let out = s.apply(&data).unwrap();
        let n = out.n() as f64;
        let mean: f64 = out.covariates().iter().sum::<f64>() / n;
        let var: f64 = out.covariates().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (n - 1.0);
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-9);
        let y_mean: f64 = out.targets().iter().sum::<f64>() / n;
        assert_abs_diff_eq!(y_mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn far_out_of_range_point_standardizes_without_error() {
        let train = toy(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 1);
        let s = standardize_fit(&train).unwrap();
        let probe = toy(&[1e6], &[-1e6], 1);
        let out = s.apply(&probe).unwrap();
        assert!(out.covariates()[0].is_finite());
        assert!(out.targets()[0].is_finite());
    }

    #[test]
    fn subset_copies_rows() {
        let data = toy(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[10.0, 20.0, 30.0], 2);
        let sub = data.subset(&[2, 0]);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.row(0), &[5.0, 6.0]);
        assert_eq!(sub.row(1), &[1.0, 2.0]);
        assert_eq!(sub.targets(), &[30.0, 10.0]);
    }
}
