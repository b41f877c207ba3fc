//! From-scratch dense network primitives: MLP parameters, forward/backward
//! passes with batch normalization and dropout, class-weighted cross-entropy,
//! and the ADAM optimizer.
//!
//! All operations are pure values-in/values-out (training-mode forward also
//! advances batch-norm running statistics on the parameters it is given).
//! Randomness is confined to explicit [`crate::rng::RngStream`] arguments.

mod adam;
mod backward;
mod forward;
mod loss;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::backward;
pub use forward::{forward_eval, forward_train, ForwardCache, BN_EPS, BN_MOMENTUM};
pub use loss::{positive_probs, weighted_cross_entropy};
pub use params::{mlp_init, BatchNorm, DenseLayer, Gradients, ModelParams};

use crate::error::{Error, Result};

/// Per-client training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    /// Loss weight per class, `[w_negative, w_positive]`.
    pub class_weights: [f64; 2],
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        if self.class_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Config("class_weights must be non-negative".into()));
        }
        if self.class_weights == [0.0, 0.0] {
            return Err(Error::Config("class_weights must not both be zero".into()));
        }
        self.adam.validate()
    }
}

/// Inverse-class-frequency weights for a label vector, normalized so the
/// weighted sample mean is 1: `w_c = n / (2 * n_c)`. A class absent from the
/// shard gets weight 0.
pub fn inverse_frequency_weights(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = n - pos;
    let w = |count: f64| if count > 0.0 { n / (2.0 * count) } else { 0.0 };
    [w(neg), w(pos)]
}
