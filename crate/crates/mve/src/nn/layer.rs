use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};

/// A dense layer `y = activation(W x + b)`.
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::config(format!(
                "weight count {} does not match {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if biases.len() != out_dim {
            return Err(Error::config(format!(
                "bias count {} does not match out_dim {out_dim}",
                biases.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    #[inline]
    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Forward pass for a single sample.
    #[inline]
    pub fn forward(&self, inputs: &[f64], outputs: &mut [f64]) {
        assert_eq!(inputs.len(), self.in_dim, "layer input length mismatch");
        assert_eq!(outputs.len(), self.out_dim, "layer output length mismatch");
        for (o, out) in outputs.iter_mut().enumerate() {
            let mut z = self.biases[o];
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for (&w, &x) in row.iter().zip(inputs) {
                z = w.mul_add(x, z);
            }
            *out = self.activation.forward(z);
        }
    }

    /// Backward pass for a single sample with accumulation semantics:
    /// `d_weights` and `d_biases` are added to, `d_inputs` is overwritten.
    ///
    /// `outputs` must be the post-activation values previously produced by
    /// `forward` on `inputs`.
    #[inline]
    pub fn backward_accumulate(
        &self,
        inputs: &[f64],
        outputs: &[f64],
        d_outputs: &[f64],
        d_inputs: &mut [f64],
        d_weights: &mut [f64],
        d_biases: &mut [f64],
    ) {
        assert_eq!(inputs.len(), self.in_dim, "layer input length mismatch");
        assert_eq!(outputs.len(), self.out_dim, "cached output length mismatch");
        assert_eq!(d_outputs.len(), self.out_dim, "upstream length mismatch");
        assert_eq!(d_inputs.len(), self.in_dim, "d_inputs length mismatch");
        assert_eq!(d_weights.len(), self.weights.len(), "d_weights length mismatch");
        assert_eq!(d_biases.len(), self.out_dim, "d_biases length mismatch");

        d_inputs.fill(0.0);
        for o in 0..self.out_dim {
            let dz = d_outputs[o] * self.activation.grad_from_output(outputs[o]);
            if dz == 0.0 {
                continue;
            }
            d_biases[o] += dz;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                d_weights[row + i] = dz.mul_add(inputs[i], d_weights[row + i]);
                d_inputs[i] = self.weights[row + i].mul_add(dz, d_inputs[i]);
            }
        }
    }
}
