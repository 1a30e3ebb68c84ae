//! Mean-variance estimation (MVE) networks for heteroscedastic regression.
//!
//! An MVE network models a scalar target as `y ~ N(mu(x), sigma^2(x))` using two
//! independent sub-networks that share nothing but the input: one predicts the
//! conditional mean, the other the conditional variance (through an exponential
//! output so it stays positive). Both are trained jointly by minimizing the
//! Gaussian negative loglikelihood.
//!
//! Joint NLL training is famously brittle: regions that start out poorly fitted
//! get assigned a large variance, stop contributing to the loss, and never
//! recover. This crate packages the training schedules and regularization
//! choices that make the model dependable, plus the evaluation machinery to
//! compare them honestly:
//!
//! - [`nn`]: a minimal dense-network kernel (exact gradients, Adam, gradient
//!   clipping, L2 penalties) sized for the split architecture and nothing more.
//! - [`model`]: the two-headed [`model::MveNetwork`] with the NLL and
//!   fixed-variance losses.
//! - [`train`]: the training driver. Three strategies (no warm-up, warm-up,
//!   warm-up with the mean frozen afterwards) crossed with equal or separate
//!   L2 constants for the two heads.
//! - [`data`] / [`eval`]: standardization fitted on training splits only,
//!   metrics on the original target scale, per-fold aggregation, and the
//!   paired two-tailed t-test used to flag significant differences.
//! - [`experiments`]: synthetic generators (sine, heteroscedastic quadratic,
//!   two-cluster), the NLL landscape profile, the variance-regularization
//!   sweep, and a nested cross-validation harness with an inner grid search
//!   over regularization constants.
//! - [`oracle`]: closed-form linear-model baselines (OLS vs GLS, ridge with
//!   its optimal constant, the debiased log-variance regression) used as
//!   analytic ground truth in tests and the `oracle` CLI subcommand.
//! - [`io`]: CSV ingestion with cell-level diagnostics, network and config
//!   serialization, run manifests, and plot-ready output files.
//!
//! # Quick start
//!
//! ```
//! use mve::experiments::{generate, SyntheticKind, SyntheticSpec};
//! use mve::model::MveNetwork;
//! use mve::train::{train, RegMode, Strategy, TrainConfig};
//! use mve::data::standardize_fit;
//!
//! # fn main() -> mve::Result<()> {
//! let data = generate(&SyntheticSpec {
//!     kind: SyntheticKind::QuadraticHetero,
//!     n: 200,
//!     seed: 7,
//! });
//! let stats = standardize_fit(&data)?;
//! let standardized = stats.apply(&data)?;
//!
//! let net = MveNetwork::init(1, &[16, 8], 7, 1.0, 1e-6)?;
//! let cfg = TrainConfig {
//!     strategy: Strategy::Warmup,
//!     reg_mode: RegMode::Equal,
//!     lambda_mean: 1e-4,
//!     lambda_var: 1e-4,
//!     epochs_per_stage: 20,
//!     ..TrainConfig::default()
//! };
//! let (trained, trace) = train(net, &standardized, &cfg)?;
//! assert_eq!(trace.train_loss.len(), 40); // two stages of 20 epochs
//! let p = trained.predict(&standardized.row(0).to_vec())?;
//! assert!(p.variance > 0.0);
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod io;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod seed;
pub mod special;
pub mod train;

pub use error::{Error, Result};
