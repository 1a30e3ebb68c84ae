use serde::{Deserialize, Serialize};

use super::{Mlp, MlpGradients};

/// Adam hyperparameters. Defaults are the usual convention.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every parameter of one network,
/// plus the step counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: MlpGradients,
    second_moment: MlpGradients,
    step_count: u64,
}

impl AdamState {
    /// Fresh state: both moments zero, step count zero.
    pub fn new(mlp: &Mlp) -> Self {
        Self {
            first_moment: MlpGradients::zeros_like(mlp),
            second_moment: MlpGradients::zeros_like(mlp),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one bias-corrected Adam update in place.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGradients, cfg: &AdamConfig) {
        assert_eq!(
            grads.layers.len(),
            self.first_moment.layers.len(),
            "gradient shape mismatch"
        );
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);

        for (li, layer) in mlp.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[li];
            let m = &mut self.first_moment.layers[li];
            let v = &mut self.second_moment.layers[li];
            update_slice(
                layer.weights_mut(),
                &g.weights,
                &mut m.weights,
                &mut v.weights,
                cfg,
                bias1,
                bias2,
            );
            update_slice(
                layer.biases_mut(),
                &g.biases,
                &mut m.biases,
                &mut v.biases,
                cfg,
                bias1,
                bias2,
            );
        }
    }
}

#[inline]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, Activation, WeightInit};
    use approx::assert_abs_diff_eq;

    fn tiny_net() -> Mlp {
        init_network(
            &[2, 3, 1],
            &[Activation::Elu, Activation::Linear],
            WeightInit::FanInNormal,
            11,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradients_are_a_fixed_point() {
        let mut net = tiny_net();
        let before: Vec<Vec<f64>> = net.layers().iter().map(|l| l.weights().to_vec()).collect();
        let grads = MlpGradients::zeros_like(&net);
        let mut state = AdamState::new(&net);
        for _ in 0..5 {
            state.step(&mut net, &grads, &AdamConfig::default());
        }
        for (l, b) in net.layers().iter().zip(&before) {
            assert_eq!(l.weights(), b.as_slice());
        }
        assert!(state.first_moment.iter_flat().all(|m| m == 0.0));
        assert!(state.second_moment.iter_flat().all(|v| v == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        // Closed form for step one: m_hat = g, v_hat = g^2, so the update is
        // -lr * g / (|g| + eps) ~= -lr * sign(g).
        let mut net = tiny_net();
        let before: Vec<f64> = net.layers()[0].weights().to_vec();
        let mut grads = MlpGradients::zeros_like(&net);
        for (i, w) in grads.layers[0].weights.iter_mut().enumerate() {
            *w = if i % 2 == 0 { 0.5 } else { -2.0 };
        }
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(&net);
        state.step(&mut net, &grads, &cfg);
        for (i, (after, before)) in net.layers()[0].weights().iter().zip(&before).enumerate() {
            let g: f64 = if i % 2 == 0 { 0.5 } else { -2.0 };
            let expected = before - cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert_abs_diff_eq!(*after, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_gradient_drives_parameter_monotonically() {
        let mut net = tiny_net();
        let start = net.layers()[0].weights()[0];
        let mut grads = MlpGradients::zeros_like(&net);
        grads.layers[0].weights[0] = 1.3;
        let mut state = AdamState::new(&net);
        let mut prev = start;
        for _ in 0..10 {
            state.step(&mut net, &grads, &AdamConfig::default());
            let cur = net.layers()[0].weights()[0];
            assert!(cur < prev, "positive gradient must keep decreasing the parameter");
            prev = cur;
        }
    }
}
