use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer};
use crate::error::{Error, Result};

/// A feed-forward stack of dense layers with an attached L2 constant for its
/// weight matrices (biases are never penalized).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    /// L2 penalty constant applied to this network's weights.
    pub l2: f64,
}

/// Weight initialization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightInit {
    /// Zero-mean normal with standard deviation `1/sqrt(fan_in)`. Keeps
    /// pre-activations O(1) so a constant output bias dominates the initial
    /// prediction.
    FanInNormal,
    /// All weights zero. Used in tests and for hand-built configurations.
    Zeros,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>, l2: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        if l2 < 0.0 {
            return Err(Error::config("l2 constant must be nonnegative"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::config(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, l2 })
    }

    #[inline]
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    #[inline]
    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights().len() + l.biases().len())
            .sum()
    }

    /// Forward pass, allocating the output.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::new(self);
        cache.fill(self, x);
        cache.output().to_vec()
    }

    /// Forward pass that keeps every layer's activations for a later
    /// backward pass.
    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let mut cache = ForwardCache::new(self);
        cache.fill(self, x);
        cache
    }

    /// Backpropagates `upstream` (dL/d output) through the cached forward
    /// state, accumulating parameter gradients into `grads`.
    ///
    /// The L2 penalty is *not* included here; see [`MlpGradients::add_l2`].
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grads: &mut MlpGradients,
        scratch: &mut BackwardScratch,
    ) {
        assert_eq!(
            cache.acts.len(),
            self.layers.len() + 1,
            "forward cache does not match this network"
        );
        assert_eq!(upstream.len(), self.output_dim(), "upstream length mismatch");
        assert_eq!(grads.layers.len(), self.layers.len(), "gradient shape mismatch");

        scratch.d_out.clear();
        scratch.d_out.extend_from_slice(upstream);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            scratch.d_in.resize(layer.in_dim(), 0.0);
            let g = &mut grads.layers[idx];
            layer.backward_accumulate(
                &cache.acts[idx],
                &cache.acts[idx + 1],
                &scratch.d_out,
                &mut scratch.d_in,
                &mut g.weights,
                &mut g.biases,
            );
            std::mem::swap(&mut scratch.d_out, &mut scratch.d_in);
        }
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights().iter())
            .map(|w| w * w)
            .sum()
    }

    /// The L2 penalty term `l2 * sum(w^2)` of the training objective.
    pub fn l2_penalty(&self) -> f64 {
        self.l2 * self.weight_sq_norm()
    }
}

/// Builds a network from layer sizes and activations.
///
/// Biases start at zero; `final_bias` overrides the bias of the last layer
/// (every unit of it), which a variance head uses so its initial prediction is
/// roughly constant.
pub fn init_network(
    layer_sizes: &[usize],
    activations: &[Activation],
    init: WeightInit,
    seed: u64,
    final_bias: Option<f64>,
) -> Result<Mlp> {
    if layer_sizes.len() < 2 {
        return Err(Error::config("need at least input and output sizes"));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::config(format!(
            "expected {} activations for {} layer sizes, got {}",
            layer_sizes.len() - 1,
            layer_sizes.len(),
            activations.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_layers = layer_sizes.len() - 1;
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let weights = match init {
            WeightInit::Zeros => vec![0.0; fan_in * fan_out],
            WeightInit::FanInNormal => {
                let dist = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt())
                    .map_err(|e| Error::config(e.to_string()))?;
                (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect()
            }
        };
        let mut biases = vec![0.0; fan_out];
        if l == n_layers - 1 {
            if let Some(b) = final_bias {
                biases.fill(b);
            }
        }
        layers.push(DenseLayer::new(fan_in, fan_out, activations[l], weights, biases)?);
    }
    Mlp::new(layers, 0.0)
}

/// Activations of every layer for one input: `acts[0]` is the input itself,
/// `acts[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new(mlp: &Mlp) -> Self {
        let mut acts = Vec::with_capacity(mlp.layers.len() + 1);
        acts.push(vec![0.0; mlp.input_dim()]);
        for layer in &mlp.layers {
            acts.push(vec![0.0; layer.out_dim()]);
        }
        Self { acts }
    }

    /// Runs the forward pass in place, reusing the buffers.
    pub fn fill(&mut self, mlp: &Mlp, x: &[f64]) {
        assert_eq!(x.len(), mlp.input_dim(), "input length mismatch");
        assert_eq!(self.acts.len(), mlp.layers.len() + 1, "cache shape mismatch");
        self.acts[0].copy_from_slice(x);
        for (idx, layer) in mlp.layers.iter().enumerate() {
            let (head, tail) = self.acts.split_at_mut(idx + 1);
            layer.forward(&head[idx], &mut tail[0]);
        }
    }

    #[inline]
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Reusable buffers for backpropagation.
#[derive(Debug, Default)]
pub struct BackwardScratch {
    d_out: Vec<f64>,
    d_in: Vec<f64>,
}

/// One gradient array per parameter array of an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl MlpGradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights().len()],
                    biases: vec![0.0; l.biases().len()],
                })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for w in &mut l.weights {
                *w *= factor;
            }
            for b in &mut l.biases {
                *b *= factor;
            }
        }
    }

    /// Adds the penalty gradient `2 * l2 * w` for every weight. Biases are
    /// left untouched.
    pub fn add_l2(&mut self, mlp: &Mlp, l2: f64) {
        if l2 == 0.0 {
            return;
        }
        assert_eq!(self.layers.len(), mlp.layers.len(), "gradient shape mismatch");
        for (g, l) in self.layers.iter_mut().zip(&mlp.layers) {
            for (dw, &w) in g.weights.iter_mut().zip(l.weights()) {
                *dw += 2.0 * l2 * w;
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| {
                l.weights.iter().map(|v| v * v).sum::<f64>()
                    + l.biases.iter().map(|v| v * v).sum::<f64>()
            })
            .sum()
    }

    /// Global L2 norm over every gradient component.
    pub fn global_norm(&self) -> f64 {
        self.sq_norm().sqrt()
    }

    /// Rescales the gradients so the global norm does not exceed `threshold`.
    ///
    /// Returns the norm before clipping. Direction is preserved; gradients at
    /// or below the threshold are untouched.
    pub fn clip(&mut self, threshold: f64) -> Result<f64> {
        if threshold <= 0.0 {
            return Err(Error::config("clip threshold must be positive"));
        }
        let norm = self.global_norm();
        if norm > threshold {
            self.scale(threshold / norm);
        }
        Ok(norm)
    }

    pub fn iter_flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }
}
