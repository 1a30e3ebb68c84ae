//! The split mean-variance architecture: two fully independent sub-networks
//! that share only the input. One head predicts the conditional mean through
//! a linear output, the other the conditional variance through an exponential
//! output (so it learns a log-variance internally), clamped below by a small
//! floor for numerical stability.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    init_network, Activation, AdamConfig, AdamState, ForwardCache, Mlp, MlpGradients, WeightInit,
};
use crate::seed::derive_seed;

/// Default lower bound on the predicted variance.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

/// A mean head and a variance head over the same input. No parameters are
/// shared between the two.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MveNetwork {
    pub mean_head: Mlp,
    pub var_head: Mlp,
    pub variance_floor: f64,
}

/// A single prediction in the units the network was trained on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Which objective a batch evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Gaussian negative loglikelihood over both heads. The constant
    /// `0.5 ln(2 pi)` is omitted (it has no gradient); reported likelihood
    /// metrics add it back, see [`crate::eval`].
    Nll,
    /// The same value, but the variance head is treated as a constant:
    /// no gradient flows into it. With a constant variance this is a scaled
    /// mean-squared error plus a constant.
    FixedVariance,
}

impl MveNetwork {
    pub fn new(mean_head: Mlp, var_head: Mlp, variance_floor: f64) -> Result<Self> {
        if mean_head.output_dim() != 1 || var_head.output_dim() != 1 {
            return Err(Error::config("both heads must have a single output"));
        }
        if mean_head.input_dim() != var_head.input_dim() {
            return Err(Error::config("heads must consume the same input"));
        }
        if !(variance_floor > 0.0) {
            return Err(Error::config("variance floor must be positive"));
        }
        if var_head.layers().last().unwrap().activation() != Activation::Exp {
            return Err(Error::config("variance head must end in an exponential output"));
        }
        if mean_head.layers().last().unwrap().activation() != Activation::Linear {
            return Err(Error::config("mean head must end in a linear output"));
        }
        Ok(Self {
            mean_head,
            var_head,
            variance_floor,
        })
    }

    /// Standard construction: both heads get the same hidden sizes with ELU
    /// activations, fan-in scaled weights, and zero biases — except the final
    /// bias of the variance head, set to `variance_bias_init` so the initial
    /// variance is roughly `exp(variance_bias_init)` everywhere.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        seed: u64,
        variance_bias_init: f64,
        variance_floor: f64,
    ) -> Result<Self> {
        Self::init_with(
            input_dim,
            hidden,
            WeightInit::FanInNormal,
            seed,
            variance_bias_init,
            variance_floor,
        )
    }

    /// Like [`MveNetwork::init`] but with an explicit weight scheme; zero
    /// weights give exactly constant initial predictions.
    pub fn init_with(
        input_dim: usize,
        hidden: &[usize],
        init: WeightInit,
        seed: u64,
        variance_bias_init: f64,
        variance_floor: f64,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut mean_acts = vec![Activation::Elu; hidden.len()];
        mean_acts.push(Activation::Linear);
        let mut var_acts = vec![Activation::Elu; hidden.len()];
        var_acts.push(Activation::Exp);

        let mean_head = init_network(&sizes, &mean_acts, init, derive_seed(seed, &[0]), None)?;
        let var_head = init_network(
            &sizes,
            &var_acts,
            init,
            derive_seed(seed, &[1]),
            Some(variance_bias_init),
        )?;
        Self::new(mean_head, var_head, variance_floor)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.mean_head.input_dim()
    }

    /// Predicts mean and (floored) variance for one input.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} components, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mean = self.mean_head.forward(x)[0];
        let raw = self.var_head.forward(x)[0];
        Ok(Prediction {
            mean,
            variance: raw.max(self.variance_floor),
        })
    }

    /// Mean (over the whole dataset) of `0.5 ln sigma^2 + 0.5 r^2 / sigma^2`.
    pub fn nll_loss(&self, data: &Dataset) -> Result<f64> {
        let idx: Vec<usize> = (0..data.n()).collect();
        self.batch_loss(data, &idx, LossKind::Nll)
    }

    /// [`MveNetwork::nll_loss`] with the variance held constant. Same value,
    /// different gradient.
    pub fn fixed_variance_loss(&self, data: &Dataset) -> Result<f64> {
        let idx: Vec<usize> = (0..data.n()).collect();
        self.batch_loss(data, &idx, LossKind::FixedVariance)
    }

    /// Loss of a mini-batch given by indices into `data`.
    pub fn batch_loss(&self, data: &Dataset, idx: &[usize], _kind: LossKind) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::config("loss of an empty batch is undefined"));
        }
        let mut acc = 0.0;
        for &i in idx {
            let p = self.predict(data.row(i))?;
            let r = data.target(i) - p.mean;
            acc += 0.5 * p.variance.ln() + 0.5 * r * r / p.variance;
        }
        Ok(acc / idx.len() as f64)
    }

    /// Loss and parameter gradients of a mini-batch (mean convention).
    ///
    /// Gradients are written into `ws.grads`; a head listed as frozen gets
    /// exactly zero gradients and no backward work. The L2 penalty is *not*
    /// added here — the training driver appends it for trainable heads.
    pub fn batch_loss_and_grads(
        &self,
        data: &Dataset,
        idx: &[usize],
        kind: LossKind,
        train_mean: bool,
        train_var: bool,
        ws: &mut BatchWorkspace,
    ) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::config("loss of an empty batch is undefined"));
        }
        let train_var = train_var && kind == LossKind::Nll;
        ws.grads.mean.reset();
        ws.grads.var.reset();
        let mut acc = 0.0;
        let floor = self.variance_floor;
        for &i in idx {
            let x = data.row(i);
            ws.mean_cache.fill(&self.mean_head, x);
            ws.var_cache.fill(&self.var_head, x);
            let mean = ws.mean_cache.output()[0];
            let raw = ws.var_cache.output()[0];
            let var = raw.max(floor);
            let r = data.target(i) - mean;
            acc += 0.5 * var.ln() + 0.5 * r * r / var;

            if train_mean {
                let upstream = [-r / var];
                self.mean_head.backward_accumulate(
                    &ws.mean_cache,
                    &upstream,
                    &mut ws.grads.mean,
                    &mut ws.scratch,
                );
            }
            if train_var && raw > floor {
                // d/d sigma^2 of (ln sigma^2)/2 + r^2/(2 sigma^2).
                let upstream = [0.5 / var - 0.5 * r * r / (var * var)];
                self.var_head.backward_accumulate(
                    &ws.var_cache,
                    &upstream,
                    &mut ws.grads.var,
                    &mut ws.scratch,
                );
            }
        }
        let inv = 1.0 / idx.len() as f64;
        ws.grads.mean.scale(inv);
        ws.grads.var.scale(inv);
        Ok(acc * inv)
    }

    /// Convenience wrapper used by gradient checks: full-batch NLL loss and
    /// gradients for both heads, including each head's L2 penalty.
    pub fn nll_loss_and_grads(&self, data: &Dataset) -> Result<(f64, MveGradients)> {
        let idx: Vec<usize> = (0..data.n()).collect();
        let mut ws = BatchWorkspace::new(self);
        let loss = self.batch_loss_and_grads(data, &idx, LossKind::Nll, true, true, &mut ws)?;
        ws.grads.mean.add_l2(&self.mean_head, self.mean_head.l2);
        ws.grads.var.add_l2(&self.var_head, self.var_head.l2);
        Ok((loss + self.mean_head.l2_penalty() + self.var_head.l2_penalty(), ws.grads))
    }
}

/// Gradients for both heads of an [`MveNetwork`].
#[derive(Debug, Clone)]
pub struct MveGradients {
    pub mean: MlpGradients,
    pub var: MlpGradients,
}

impl MveGradients {
    pub fn zeros_like(net: &MveNetwork) -> Self {
        Self {
            mean: MlpGradients::zeros_like(&net.mean_head),
            var: MlpGradients::zeros_like(&net.var_head),
        }
    }

    /// Global L2 norm across both heads' gradients.
    pub fn global_norm(&self) -> f64 {
        (self.mean.sq_norm() + self.var.sq_norm()).sqrt()
    }

    /// Clips by the global norm across both heads; returns the pre-clip norm.
    pub fn clip(&mut self, threshold: f64) -> Result<f64> {
        if threshold <= 0.0 {
            return Err(Error::config("clip threshold must be positive"));
        }
        let norm = self.global_norm();
        if norm > threshold {
            let s = threshold / norm;
            self.mean.scale(s);
            self.var.scale(s);
        }
        Ok(norm)
    }
}

/// Reusable buffers for batched loss/gradient evaluation.
#[derive(Debug)]
pub struct BatchWorkspace {
    mean_cache: ForwardCache,
    var_cache: ForwardCache,
    scratch: crate::nn::BackwardScratch,
    pub grads: MveGradients,
}

impl BatchWorkspace {
    pub fn new(net: &MveNetwork) -> Self {
        Self {
            mean_cache: ForwardCache::new(&net.mean_head),
            var_cache: ForwardCache::new(&net.var_head),
            scratch: Default::default(),
            grads: MveGradients::zeros_like(net),
        }
    }
}

/// Adam state for both heads.
#[derive(Debug, Clone)]
pub struct MveAdamState {
    pub mean: AdamState,
    pub var: AdamState,
}

impl MveAdamState {
    pub fn new(net: &MveNetwork) -> Self {
        Self {
            mean: AdamState::new(&net.mean_head),
            var: AdamState::new(&net.var_head),
        }
    }

    pub fn step(
        &mut self,
        net: &mut MveNetwork,
        grads: &MveGradients,
        cfg: &AdamConfig,
        update_mean: bool,
        update_var: bool,
    ) {
        if update_mean {
            self.mean.step(&mut net.mean_head, &grads.mean, cfg);
        }
        if update_var {
            self.var.step(&mut net.var_head, &grads.var, cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseLayer;
    use approx::assert_abs_diff_eq;

    /// Hand-built network: mean = mean_bias, variance = exp(var_bias), both
    /// heads single layers with zero weights on one input.
    fn constant_net(mean_bias: f64, var_bias: f64) -> MveNetwork {
        let mean = Mlp::new(
            vec![DenseLayer::new(1, 1, Activation::Linear, vec![0.0], vec![mean_bias]).unwrap()],
            0.0,
        )
        .unwrap();
        let var = Mlp::new(
            vec![DenseLayer::new(1, 1, Activation::Exp, vec![0.0], vec![var_bias]).unwrap()],
            0.0,
        )
        .unwrap();
        MveNetwork::new(mean, var, DEFAULT_VARIANCE_FLOOR).unwrap()
    }

    fn one_point(x: f64, y: f64) -> Dataset {
        Dataset::new(vec![x], vec![y], 1, "point").unwrap()
    }

    #[test]
    fn zero_weight_init_predicts_variance_e_everywhere() {
        let net =
            MveNetwork::init_with(1, &[4, 3], WeightInit::Zeros, 0, 1.0, 1e-6).unwrap();
        for x in [-3.0, 0.0, 0.5, 11.0] {
            let p = net.predict(&[x]).unwrap();
            assert_abs_diff_eq!(p.variance, 1.0_f64.exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn variance_floor_activates_for_very_negative_preactivation() {
        // exp(-20) ~ 2e-9 < 1e-6, so the floor must win.
        let net = constant_net(0.0, -20.0);
        let p = net.predict(&[0.3]).unwrap();
        assert_eq!(p.variance, 1e-6);
    }

    #[test]
    fn mean_head_identity_configuration_reproduces_input() {
        let mean = Mlp::new(
            vec![DenseLayer::new(2, 1, Activation::Linear, vec![1.0, 0.0], vec![0.0]).unwrap()],
            0.0,
        )
        .unwrap();
        let var = Mlp::new(
            vec![DenseLayer::new(2, 1, Activation::Exp, vec![0.0, 0.0], vec![0.0]).unwrap()],
            0.0,
        )
        .unwrap();
        let net = MveNetwork::new(mean, var, 1e-6).unwrap();
        let p = net.predict(&[7.5, -2.0]).unwrap();
        assert_eq!(p.mean, 7.5);
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let net = constant_net(0.0, 0.0);
        assert!(net.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn nll_loss_hand_values() {
        // mu = y, sigma^2 = 1 -> 0.
        let net = constant_net(2.0, 0.0);
        assert_abs_diff_eq!(net.nll_loss(&one_point(0.0, 2.0)).unwrap(), 0.0);
        // mu = y - 2, sigma^2 = 1 -> 0.5 * 4 = 2.
        let net = constant_net(1.0, 0.0);
        assert_abs_diff_eq!(net.nll_loss(&one_point(0.0, 3.0)).unwrap(), 2.0);
        // mu = y, sigma^2 = e^2 -> 0.5 * ln(e^2) = 1.
        let net = constant_net(-1.0, 2.0);
        assert_abs_diff_eq!(net.nll_loss(&one_point(0.0, -1.0)).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let net = constant_net(0.0, 0.0);
        let data = one_point(0.0, 0.0);
        assert!(net.batch_loss(&data, &[], LossKind::Nll).is_err());
    }

    #[test]
    fn fixed_variance_gradients_for_var_head_are_exactly_zero() {
        let net = MveNetwork::init(2, &[6, 4], 5, 1.0, 1e-6).unwrap();
        let data = Dataset::new(
            vec![0.3, -0.4, 1.2, 0.9, -1.0, 0.1],
            vec![0.5, -0.7, 1.1],
            2,
            "toy",
        )
        .unwrap();
        let mut ws = BatchWorkspace::new(&net);
        net.batch_loss_and_grads(&data, &[0, 1, 2], LossKind::FixedVariance, true, true, &mut ws)
            .unwrap();
        assert!(ws.grads.var.iter_flat().all(|g| g == 0.0));
        assert!(ws.grads.mean.iter_flat().any(|g| g != 0.0));
    }

    #[test]
    fn fixed_variance_loss_is_scaled_mse_plus_half() {
        // With frozen variance e: loss = MSE / (2e) + 1/2.
        let net = constant_net(0.4, 1.0);
        let data = Dataset::new(
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, -0.5, 0.4, 2.0],
            1,
            "toy",
        )
        .unwrap();
        let mse: f64 = data
            .targets()
            .iter()
            .map(|y| (y - 0.4) * (y - 0.4))
            .sum::<f64>()
            / data.n() as f64;
        let expected = mse / (2.0 * 1.0_f64.exp()) + 0.5;
        assert_abs_diff_eq!(net.fixed_variance_loss(&data).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn fixed_variance_argmin_matches_plain_mse_argmin() {
        // One free parameter (the mean bias); grid both objectives.
        let data = Dataset::new(
            vec![0.0; 5],
            vec![0.1, 0.9, 0.4, 0.6, 0.2],
            1,
            "toy",
        )
        .unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.005).collect();
        let mut best_fixed = (f64::INFINITY, 0.0);
        let mut best_mse = (f64::INFINITY, 0.0);
        for &b in &grid {
            let net = constant_net(b, 1.0);
            let fixed = net.fixed_variance_loss(&data).unwrap();
            let mse: f64 = data.targets().iter().map(|y| (y - b) * (y - b)).sum::<f64>()
                / data.n() as f64;
            if fixed < best_fixed.0 {
                best_fixed = (fixed, b);
            }
            if mse < best_mse.0 {
                best_mse = (mse, b);
            }
        }
        assert_eq!(best_fixed.1, best_mse.1);
    }

    #[test]
    fn nll_is_minimized_at_variance_equal_squared_residual() {
        // Hold mu fixed, grid the variance-head bias: the optimum of
        // 0.5 ln v + 0.5 r^2 / v sits at v = r^2.
        let y = 1.7;
        let mu = 0.5;
        let r2 = (y - mu) * (y - mu);
        let data = one_point(0.0, y);
        let mut best = (f64::INFINITY, 0.0);
        for i in -400..=400 {
            let b = i as f64 * 0.01;
            let net = constant_net(mu, b);
            let loss = net.nll_loss(&data).unwrap();
            if loss < best.0 {
                best = (loss, b);
            }
        }
        assert_abs_diff_eq!(best.1.exp(), r2, epsilon = r2 * 0.02);
    }

    #[test]
    fn heads_share_no_parameters() {
        let mut net = MveNetwork::init(1, &[5], 3, 1.0, 1e-6).unwrap();
        let x = [0.8];
        let before = net.predict(&x).unwrap();
        // Perturb a mean-head weight: variance must not move.
        net.mean_head.layers_mut()[0].weights_mut()[2] += 0.5;
        let after = net.predict(&x).unwrap();
        assert_eq!(after.variance, before.variance);
        assert_ne!(after.mean, before.mean);
        // Perturb a variance-head weight: mean must not move.
        let mid = after;
        net.var_head.layers_mut()[0].weights_mut()[1] += 0.5;
        let last = net.predict(&x).unwrap();
        assert_eq!(last.mean, mid.mean);
        assert_ne!(last.variance, mid.variance);
    }

    #[test]
    fn nll_gradients_match_finite_differences_both_heads() {
        let mut net = MveNetwork::init(2, &[5, 3], 21, 1.0, 1e-6).unwrap();
        net.mean_head.l2 = 0.01;
        net.var_head.l2 = 0.002;
        let data = Dataset::new(
            vec![0.4, -0.2, -0.9, 0.6, 0.1, 1.3, -0.5, 0.8],
            vec![0.3, -1.0, 0.6, 0.1],
            2,
            "toy",
        )
        .unwrap();
        let (_, grads) = net.nll_loss_and_grads(&data).unwrap();
        let h = 1e-5;
        let mut check = |net: &mut MveNetwork, head: Head, li: usize, wi: usize, analytic: f64| {
            let read = |n: &MveNetwork| n.nll_loss(&data).unwrap()
                + n.mean_head.l2_penalty()
                + n.var_head.l2_penalty();
            let bump = |n: &mut MveNetwork, delta: f64| {
                let mlp = match head {
                    Head::Mean => &mut n.mean_head,
                    Head::Var => &mut n.var_head,
                };
                mlp.layers_mut()[li].weights_mut()[wi] += delta;
            };
            bump(net, h);
            let plus = read(net);
            bump(net, -2.0 * h);
            let minus = read(net);
            bump(net, h);
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs());
            assert!(
                (analytic - numeric).abs() <= 1e-8 + 1e-4 * denom,
                "{head:?} grad mismatch at layer {li} weight {wi}: analytic={analytic} numeric={numeric}"
            );
        };
        #[derive(Debug, Clone, Copy)]
        enum Head {
            Mean,
            Var,
        }
        for li in 0..net.mean_head.layers().len() {
            for wi in 0..net.mean_head.layers()[li].weights().len() {
                let analytic = grads.mean.layers[li].weights[wi];
                check(&mut net, Head::Mean, li, wi, analytic);
            }
        }
        for li in 0..net.var_head.layers().len() {
            for wi in 0..net.var_head.layers()[li].weights().len() {
                let analytic = grads.var.layers[li].weights[wi];
                check(&mut net, Head::Var, li, wi, analytic);
            }
        }
    }
}
