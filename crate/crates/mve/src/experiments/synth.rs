use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// The synthetic datasets used by the demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `x ~ U(0, 10)`, `y ~ N(0.4 sin(2 pi x), 0.01^2)`. A smooth mean with
    /// nearly noiseless targets; joint NLL training notoriously fails on it.
    Sine,
    /// `x ~ U(-1, 1)`, `y ~ N(x^2, (0.1 + 0.2 x^2)^2)`.
    QuadraticHetero,
    /// Two groups of `n` points each: `N(2, 0.5^2)` and `N(5, 0.1^2)`, with a
    /// constant covariate. The first `n` rows are the first cluster.
    TwoCluster,
}

impl SyntheticKind {
    pub fn label(self) -> &'static str {
        match self {
            SyntheticKind::Sine => "sine",
            SyntheticKind::QuadraticHetero => "quadratic-hetero",
            SyntheticKind::TwoCluster => "two-cluster",
        }
    }
}

/// What to generate. For [`SyntheticKind::TwoCluster`], `n` is the size of
/// *each* cluster; for the others it is the total sample size.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub seed: u64,
}

/// True mean of the sine data.
pub fn sine_mean(x: f64) -> f64 {
    0.4 * (2.0 * std::f64::consts::PI * x).sin()
}

/// Noise standard deviation of the sine data.
pub const SINE_NOISE_STD: f64 = 0.01;

/// True mean of the quadratic data.
pub fn quadratic_mean(x: f64) -> f64 {
    x * x
}

/// True noise standard deviation of the quadratic data.
pub fn quadratic_noise_std(x: f64) -> f64 {
    0.1 + 0.2 * x * x
}

/// Draws a synthetic dataset. Deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Dataset {
    assert!(spec.n > 0, "sample size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let standard = Normal::new(0.0, 1.0).unwrap();
    match spec.kind {
        SyntheticKind::Sine => {
            let xs = Uniform::new(0.0, 10.0);
            let mut x = Vec::with_capacity(spec.n);
            let mut y = Vec::with_capacity(spec.n);
            for _ in 0..spec.n {
                let xi = xs.sample(&mut rng);
                x.push(xi);
                y.push(sine_mean(xi) + SINE_NOISE_STD * standard.sample(&mut rng));
            }
            Dataset::new(x, y, 1, spec.kind.label()).unwrap()
        }
        SyntheticKind::QuadraticHetero => {
            let xs = Uniform::new(-1.0, 1.0);
            let mut x = Vec::with_capacity(spec.n);
            let mut y = Vec::with_capacity(spec.n);
            for _ in 0..spec.n {
                let xi = xs.sample(&mut rng);
                x.push(xi);
                y.push(quadratic_mean(xi) + quadratic_noise_std(xi) * standard.sample(&mut rng));
            }
            Dataset::new(x, y, 1, spec.kind.label()).unwrap()
        }
        SyntheticKind::TwoCluster => {
            let mut x = Vec::with_capacity(2 * spec.n);
            let mut y = Vec::with_capacity(2 * spec.n);
            for _ in 0..spec.n {
                x.push(1.0);
                y.push(2.0 + 0.5 * standard.sample(&mut rng));
            }
            for _ in 0..spec.n {
                x.push(1.0);
                y.push(5.0 + 0.1 * standard.sample(&mut rng));
            }
            Dataset::new(x, y, 1, spec.kind.label()).unwrap()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_noise_stdev_in_expected_band() {
        let data = generate(&SyntheticSpec {
            kind: SyntheticKind::Sine,
            n: 1000,
            seed: 1,
        });
        let resid: Vec<f64> = (0..data.n())
            .map(|i| data.target(i) - sine_mean(data.row(i)[0]))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
            / (resid.len() - 1) as f64)
            .sqrt();
        assert!(
            (0.008..=0.012).contains(&sd),
            "sine residual stdev {sd} outside [0.008, 0.012]"
        );
        // Covariates stay in [0, 10].
        assert!(data.covariates().iter().all(|&x| (0.0..=10.0).contains(&x)));
    }

    #[test]
    fn quadratic_noise_profile_from_binned_samples() {
        let data = generate(&SyntheticSpec {
            kind: SyntheticKind::QuadraticHetero,
            n: 100_000,
            seed: 2,
        });
        // Bin around x = 0 and near |x| = 1 and compare noise levels.
        let sd_in = |lo: f64, hi: f64| -> f64 {
            let r: Vec<f64> = (0..data.n())
                .filter(|&i| {
                    let x = data.row(i)[0];
                    x >= lo && x < hi
                })
                .map(|i| data.target(i) - quadratic_mean(data.row(i)[0]))
                .collect();
            let m = r.iter().sum::<f64>() / r.len() as f64;
            (r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r.len() - 1) as f64).sqrt()
        };
        let sd0 = sd_in(-0.05, 0.05);
        assert!(
            (sd0 - 0.1).abs() < 0.005 + 0.05 * 0.1,
            "noise stdev near x=0 is {sd0}, expected ~0.1"
        );
        // At |x| ~ 1 the binned stdev approaches 0.1 + 0.2 = 0.3.
        let sd_edge = 0.5 * (sd_in(-1.0, -0.97) + sd_in(0.97, 1.0));
        assert!(
            (sd_edge - 0.295).abs() < 0.3 * 0.05 + 0.01,
            "noise stdev near |x|=1 is {sd_edge}, expected ~0.3"
        );
    }

    #[test]
    fn two_cluster_counts_and_means() {
        let data = generate(&SyntheticSpec {
            kind: SyntheticKind::TwoCluster,
            n: 100,
            seed: 3,
        });
        assert_eq!(data.n(), 200);
        let first = &data.targets()[..100];
        let second = &data.targets()[100..];
        let m1 = first.iter().sum::<f64>() / 100.0;
        let m2 = second.iter().sum::<f64>() / 100.0;
        assert!((m1 - 2.0).abs() < 0.2, "cluster 1 mean {m1}");
        assert!((m2 - 5.0).abs() < 0.05, "cluster 2 mean {m2}");
        assert!(data.covariates().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::Sine,
            n: 50,
            seed: 9,
        };
        let a = generate(&spec);
        let b = generate(&spec);
        assert_eq!(a.covariates(), b.covariates());
        assert_eq!(a.targets(), b.targets());
    }
}
