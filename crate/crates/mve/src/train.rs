//! Training strategies for the two-headed network.
//!
//! Three schedules are supported, each crossed with equal or separate L2
//! constants for the mean and variance heads:
//!
//! - `NoWarmup`: one stage minimizing the NLL over all parameters.
//! - `Warmup`: a first stage that treats the variance as a constant and fits
//!   only the mean, then a second stage minimizing the NLL over everything.
//! - `WarmupFixedMean`: the same first stage, then a second stage that learns
//!   only the variance while the mean stays frozen.
//!
//! Mini-batches are reshuffled every epoch from the run's seed, gradients are
//! clipped by global norm across the trainable parameters, and Adam moments
//! are reset between stages (the objective and the frozen set change).
//! A non-finite loss aborts the run with a divergence error rather than
//! retrying: instability is a result, not noise.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{BatchWorkspace, LossKind, MveAdamState, MveNetwork};
use crate::nn::AdamConfig;
use crate::seed::derive_seed;

/// Training schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    NoWarmup,
    Warmup,
    WarmupFixedMean,
}

impl Strategy {
    pub fn stage_count(self) -> usize {
        match self {
            Strategy::NoWarmup => 1,
            Strategy::Warmup | Strategy::WarmupFixedMean => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::NoWarmup => "no-warmup",
            Strategy::Warmup => "warmup",
            Strategy::WarmupFixedMean => "warmup-fixed-mean",
        }
    }
}

/// Whether the two heads share one L2 constant or get their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegMode {
    Equal,
    Separate,
}

impl RegMode {
    pub fn name(self) -> &'static str {
        match self {
            RegMode::Equal => "equal",
            RegMode::Separate => "separate",
        }
    }
}

/// Which parameter groups a stage leaves untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrozenHeads {
    pub mean: bool,
    pub var: bool,
}

/// The frozen parameter groups for a 1-based stage of a strategy.
pub fn freeze_mask(strategy: Strategy, stage: usize) -> Result<FrozenHeads> {
    match (strategy, stage) {
        (Strategy::NoWarmup, 1) => Ok(FrozenHeads { mean: false, var: false }),
        (Strategy::Warmup, 1) | (Strategy::WarmupFixedMean, 1) => {
            Ok(FrozenHeads { mean: false, var: true })
        }
        (Strategy::Warmup, 2) => Ok(FrozenHeads { mean: false, var: false }),
        (Strategy::WarmupFixedMean, 2) => Ok(FrozenHeads { mean: true, var: false }),
        _ => Err(Error::config(format!(
            "strategy {} has no stage {stage}",
            strategy.name()
        ))),
    }
}

fn stage_loss_kind(strategy: Strategy, stage: usize) -> LossKind {
    match (strategy, stage) {
        (Strategy::Warmup, 1) | (Strategy::WarmupFixedMean, 1) => LossKind::FixedVariance,
        _ => LossKind::Nll,
    }
}

/// Full configuration of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub reg_mode: RegMode,
    pub lambda_mean: f64,
    pub lambda_var: f64,
    pub epochs_per_stage: usize,
    pub batch_size: usize,
    pub clip_threshold: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Warmup,
            reg_mode: RegMode::Equal,
            lambda_mean: 0.0,
            lambda_var: 0.0,
            epochs_per_stage: 1000,
            batch_size: 32,
            clip_threshold: 5.0,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_mean < 0.0 || self.lambda_var < 0.0 {
            return Err(Error::config("regularization constants must be nonnegative"));
        }
        if self.reg_mode == RegMode::Equal && self.lambda_mean != self.lambda_var {
            return Err(Error::config(format!(
                "equal regularization requires lambda_mean == lambda_var, got {} and {}",
                self.lambda_mean, self.lambda_var
            )));
        }
        if self.epochs_per_stage < 1 {
            return Err(Error::config("epochs_per_stage must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.clip_threshold <= 0.0 {
            return Err(Error::config("clip threshold must be positive"));
        }
        Ok(())
    }

    /// Total epochs consumed: `stage_count * epochs_per_stage`.
    pub fn total_epochs(&self) -> usize {
        self.strategy.stage_count() * self.epochs_per_stage
    }
}

/// Per-epoch record of a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Mean per-point training loss of each epoch (the stage objective's data
    /// term, without L2).
    pub train_loss: Vec<f64>,
    /// Same quantity on a held-out set, when one was supplied.
    pub val_loss: Option<Vec<f64>>,
    /// Epoch indices where each stage ended (exclusive).
    pub stage_boundaries: Vec<usize>,
}

/// The per-epoch losses of a single stage.
#[derive(Debug, Clone, Default)]
pub struct StageTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Option<Vec<f64>>,
}

/// Runs one stage of the configured strategy (`stage` is 1-based).
///
/// Useful on its own for inspecting a schedule mid-way; [`train`] composes the
/// stages. The stage's shuffle stream depends only on `(cfg.seed, stage)`, so
/// composition and stage-by-stage execution produce identical parameters.
pub fn train_stage(
    mut net: MveNetwork,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    stage: usize,
) -> Result<(MveNetwork, StageTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if data.p() != net.input_dim() {
        return Err(Error::config(format!(
            "network expects {} inputs, dataset has {} columns",
            net.input_dim(),
            data.p()
        )));
    }
    let frozen = freeze_mask(cfg.strategy, stage)?;
    let kind = stage_loss_kind(cfg.strategy, stage);
    net.mean_head.l2 = cfg.lambda_mean;
    net.var_head.l2 = cfg.lambda_var;

    let mut trace = StageTrace {
        val_loss: validation.map(|_| Vec::new()),
        ..StageTrace::default()
    };
    let n = data.n();
    let mut ws = BatchWorkspace::new(&net);
    // Fresh moments per stage: the objective and frozen set change.
    let mut adam = MveAdamState::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[stage as u64]));
    let mut order: Vec<usize> = (0..n).collect();
    let val_idx: Vec<usize> = validation.map(|v| (0..v.n()).collect()).unwrap_or_default();

    for epoch in 0..cfg.epochs_per_stage {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss =
                net.batch_loss_and_grads(data, batch, kind, !frozen.mean, !frozen.var, &mut ws)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    stage,
                    epoch,
                    detail: format!("batch loss is {loss}"),
                });
            }
            if !frozen.mean {
                ws.grads.mean.add_l2(&net.mean_head, cfg.lambda_mean);
            }
            if !frozen.var && kind == LossKind::Nll {
                ws.grads.var.add_l2(&net.var_head, cfg.lambda_var);
            }
            ws.grads.clip(cfg.clip_threshold)?;
            adam.step(&mut net, &ws.grads, &cfg.adam, !frozen.mean, !frozen.var);
            loss_sum += loss * batch.len() as f64;
        }
        trace.train_loss.push(loss_sum / n as f64);
        if let (Some(val), Some(vl)) = (validation, trace.val_loss.as_mut()) {
            let v = net.batch_loss(val, &val_idx, kind)?;
            if !v.is_finite() {
                return Err(Error::Divergence {
                    stage,
                    epoch,
                    detail: format!("validation loss is {v}"),
                });
            }
            vl.push(v);
        }
    }
    Ok((net, trace))
}

/// Trains a network according to `cfg`. See the module docs for the stage
/// layout of each strategy.
pub fn train(net: MveNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<(MveNetwork, TrainTrace)> {
    train_with_validation(net, data, None, cfg)
}

/// [`train`] plus an optional held-out set evaluated once per epoch.
pub fn train_with_validation(
    net: MveNetwork,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(MveNetwork, TrainTrace)> {
    let mut trace = TrainTrace {
        val_loss: validation.map(|_| Vec::new()),
        ..TrainTrace::default()
    };
    let mut net = net;
    for stage in 1..=cfg.strategy.stage_count() {
        let (trained, stage_trace) = train_stage(net, data, validation, cfg, stage)?;
        net = trained;
        trace.train_loss.extend(stage_trace.train_loss);
        if let (Some(dst), Some(src)) = (trace.val_loss.as_mut(), stage_trace.val_loss) {
            dst.extend(src);
        }
        trace.stage_boundaries.push(trace.train_loss.len());
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize_fit;
    use crate::experiments::{generate, SyntheticKind, SyntheticSpec};

    fn small_sine(n: usize, seed: u64) -> Dataset {
        let data = generate(&SyntheticSpec {
            kind: SyntheticKind::Sine,
            n,
            seed,
        });
        let s = standardize_fit(&data).unwrap();
        s.apply(&data).unwrap()
    }

    fn head_params(mlp: &crate::nn::Mlp) -> Vec<Vec<f64>> {
        mlp.layers()
            .iter()
            .map(|l| {
                let mut v = l.weights().to_vec();
                v.extend_from_slice(l.biases());
                v
            })
            .collect()
    }

    fn quick_cfg(strategy: Strategy) -> TrainConfig {
        TrainConfig {
            strategy,
            reg_mode: RegMode::Separate,
            lambda_mean: 1e-4,
            lambda_var: 1e-3,
            epochs_per_stage: 5,
            batch_size: 32,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn freeze_masks_match_strategy_definitions() {
        assert_eq!(
            freeze_mask(Strategy::NoWarmup, 1).unwrap(),
            FrozenHeads { mean: false, var: false }
        );
        assert_eq!(
            freeze_mask(Strategy::Warmup, 1).unwrap(),
            FrozenHeads { mean: false, var: true }
        );
        assert_eq!(
            freeze_mask(Strategy::Warmup, 2).unwrap(),
            FrozenHeads { mean: false, var: false }
        );
        assert_eq!(
            freeze_mask(Strategy::WarmupFixedMean, 1).unwrap(),
            FrozenHeads { mean: false, var: true }
        );
        assert_eq!(
            freeze_mask(Strategy::WarmupFixedMean, 2).unwrap(),
            FrozenHeads { mean: true, var: false }
        );
        assert!(freeze_mask(Strategy::NoWarmup, 2).is_err());
        assert!(freeze_mask(Strategy::Warmup, 3).is_err());
    }

    #[test]
    fn equal_mode_rejects_distinct_lambdas() {
        let cfg = TrainConfig {
            reg_mode: RegMode::Equal,
            lambda_mean: 1e-4,
            lambda_var: 1e-3,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frozen_heads_are_bit_identical_across_their_stage() {
        let data = small_sine(64, 1);
        let net0 = MveNetwork::init(1, &[8, 4], 7, 1.0, 1e-6).unwrap();
        let cfg = quick_cfg(Strategy::WarmupFixedMean);

        // Stage 1 freezes the variance head.
        let (net1, _) = train_stage(net0.clone(), &data, None, &cfg, 1).unwrap();
        assert_eq!(head_params(&net1.var_head), head_params(&net0.var_head));
        assert_ne!(head_params(&net1.mean_head), head_params(&net0.mean_head));

        // Stage 2 freezes the mean head.
        let (net2, _) = train_stage(net1.clone(), &data, None, &cfg, 2).unwrap();
        assert_eq!(head_params(&net2.mean_head), head_params(&net1.mean_head));
        assert_ne!(head_params(&net2.var_head), head_params(&net1.var_head));
    }

    #[test]
    fn stagewise_execution_equals_composed_run() {
        let data = small_sine(48, 6);
        let net0 = MveNetwork::init(1, &[6], 2, 1.0, 1e-6).unwrap();
        let cfg = quick_cfg(Strategy::Warmup);
        let (composed, _) = train(net0.clone(), &data, &cfg).unwrap();
        let (step1, _) = train_stage(net0, &data, None, &cfg, 1).unwrap();
        let (step2, _) = train_stage(step1, &data, None, &cfg, 2).unwrap();
        assert_eq!(head_params(&composed.mean_head), head_params(&step2.mean_head));
        assert_eq!(head_params(&composed.var_head), head_params(&step2.var_head));
    }

    #[test]
    fn training_is_reproducible_for_identical_inputs() {
        let data = small_sine(48, 9);
        let cfg = quick_cfg(Strategy::Warmup);
        let net = MveNetwork::init(1, &[6, 4], 3, 1.0, 1e-6).unwrap();
        let (a, trace_a) = train(net.clone(), &data, &cfg).unwrap();
        let (b, trace_b) = train(net, &data, &cfg).unwrap();
        assert_eq!(head_params(&a.mean_head), head_params(&b.mean_head));
        assert_eq!(head_params(&a.var_head), head_params(&b.var_head));
        assert_eq!(trace_a.train_loss, trace_b.train_loss);
    }

    #[test]
    fn trace_lengths_and_stage_boundaries() {
        let data = small_sine(40, 2);
        let net = MveNetwork::init(1, &[5], 1, 1.0, 1e-6).unwrap();
        for (strategy, total, bounds) in [
            (Strategy::NoWarmup, 5, vec![5]),
            (Strategy::Warmup, 10, vec![5, 10]),
            (Strategy::WarmupFixedMean, 10, vec![5, 10]),
        ] {
            let cfg = quick_cfg(strategy);
            let (_, trace) = train(net.clone(), &data, &cfg).unwrap();
            assert_eq!(trace.train_loss.len(), total);
            assert_eq!(cfg.total_epochs(), total);
            assert_eq!(trace.stage_boundaries, bounds);
        }
    }

    #[test]
    fn warmup_stage_decreases_training_loss_on_sine() {
        let data = small_sine(256, 4);
        let net = MveNetwork::init(1, &[16, 8], 5, 1.0, 1e-6).unwrap();
        let cfg = TrainConfig {
            epochs_per_stage: 30,
            ..quick_cfg(Strategy::Warmup)
        };
        let (_, trace) = train(net, &data, &cfg).unwrap();
        let first = trace.train_loss[0];
        let last_of_stage1 = trace.train_loss[trace.stage_boundaries[0] - 1];
        assert!(
            last_of_stage1 < first,
            "warm-up loss should drop: first {first}, last {last_of_stage1}"
        );
    }

    #[test]
    fn validation_trace_tracks_epochs() {
        let data = small_sine(40, 3);
        let val = small_sine(16, 5);
        let net = MveNetwork::init(1, &[5], 2, 1.0, 1e-6).unwrap();
        let cfg = quick_cfg(Strategy::Warmup);
        let (_, trace) = train_with_validation(net, &data, Some(&val), &cfg).unwrap();
        assert_eq!(trace.val_loss.unwrap().len(), trace.train_loss.len());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let data = Dataset::new(vec![], vec![], 1, "empty").unwrap();
        let net = MveNetwork::init(1, &[4], 0, 1.0, 1e-6).unwrap();
        assert!(train(net, &data, &quick_cfg(Strategy::NoWarmup)).is_err());
    }
}
