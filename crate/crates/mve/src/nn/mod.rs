//! Minimal dense-network machinery: parameter storage, forward pass, exact
//! gradients, Adam with global-norm gradient clipping, and L2 penalties.
//!
//! This is deliberately small — just enough for a pair of feed-forward heads.
//! No computation graphs, no convolutions, no dropout.
//!
//! Shape contracts on the hot path (`forward`, `backward_*`, `adam` updates)
//! are enforced with `assert!`; violating them is a programmer error.
//! Construction and configuration go through `Result`.

mod activation;
mod layer;
mod mlp;
mod optim;

pub use activation::Activation;
pub use layer::DenseLayer;
pub use mlp::{init_network, BackwardScratch, ForwardCache, LayerGradients, Mlp, MlpGradients, WeightInit};
pub use optim::{AdamConfig, AdamState};
