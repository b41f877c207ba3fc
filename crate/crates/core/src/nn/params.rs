//! Model parameters and their flat vector representation.
//!
//! Aggregation strategies and the optimizer work on flat `Vec<f64>` views of
//! the parameter tree. The layout is fixed: for each layer its weight matrix
//! (row-major) then bias; after all layers, for each hidden batch-norm its
//! gamma then beta shift (trainable view) followed by running mean and
//! running variance (full view only). Flatten/unflatten round-trips are
//! bit-exact.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Row-major, shape (out, in).
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Batch-norm parameters and running statistics for one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta_shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn identity(size: usize) -> Self {
        Self {
            gamma: Array1::ones(size),
            beta_shift: Array1::zeros(size),
            running_mean: Array1::zeros(size),
            running_var: Array1::ones(size),
        }
    }
}

/// Full parameter set of an MLP with batch-normalized hidden layers and a
/// 2-unit linear output head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Input dim, hidden dims, output dim (always 2 for models built through
    /// [`mlp_init`]).
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    /// One entry per hidden layer.
    pub bn: Vec<BatchNorm>,
}

/// Initializes an MLP: weights uniform in ±sqrt(6 / (fan_in + fan_out)),
/// biases zero, batch-norm at identity (gamma 1, shift 0, mean 0, var 1).
/// Deterministic in `seed`.
pub fn mlp_init(layer_sizes: &[usize], seed: u64) -> Result<ModelParams> {
    if layer_sizes.len() < 3 {
        return Err(Error::Config(
            "layer_sizes needs input, at least one hidden, and output entries".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    if *layer_sizes.last().unwrap() != 2 {
        return Err(Error::Config(
            "output layer must have exactly 2 units for the binary task".into(),
        ));
    }
    let mut stream = RngStream::new(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight =
            Array2::from_shape_fn((fan_out, fan_in), |_| stream.uniform_in(-limit, limit));
        layers.push(DenseLayer {
            weight,
            bias: Array1::zeros(fan_out),
        });
    }
    let bn = layer_sizes[1..layer_sizes.len() - 1]
        .iter()
        .map(|&s| BatchNorm::identity(s))
        .collect();
    Ok(ModelParams {
        layer_sizes: layer_sizes.to_vec(),
        layers,
        bn,
    })
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_hidden(&self) -> usize {
        self.layer_sizes.len().saturating_sub(2)
    }

    /// Checks internal shape consistency and running-variance positivity.
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layers.len() != self.layer_sizes.len() - 1 {
            return Err(Error::Shape("layer count inconsistent with sizes".into()));
        }
        if self.bn.len() != self.num_hidden() {
            return Err(Error::Shape("one batch-norm per hidden layer required".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let (out_d, in_d) = (self.layer_sizes[i + 1], self.layer_sizes[i]);
            if layer.weight.dim() != (out_d, in_d) || layer.bias.len() != out_d {
                return Err(Error::Shape(format!(
                    "layer {i}: expected weight {out_d}x{in_d}, bias {out_d}"
                )));
            }
        }
        for (i, bn) in self.bn.iter().enumerate() {
            let d = self.layer_sizes[i + 1];
            if bn.gamma.len() != d
                || bn.beta_shift.len() != d
                || bn.running_mean.len() != d
                || bn.running_var.len() != d
            {
                return Err(Error::Shape(format!("batch-norm {i}: expected size {d}")));
            }
            if bn.running_var.iter().any(|&v| v < 0.0) {
                return Err(Error::Shape(format!(
                    "batch-norm {i}: running variance must be non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    /// Number of trainable scalars (weights, biases, gammas, beta shifts).
    pub fn trainable_len(&self) -> usize {
        let layer: usize = self
            .layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let bn: usize = self.layer_sizes[1..self.layer_sizes.len() - 1]
            .iter()
            .map(|&s| 2 * s)
            .sum();
        layer + bn
    }

    /// Number of scalars in the full flat form (trainable plus running stats).
    pub fn flat_len(&self) -> usize {
        let bn_stats: usize = self.layer_sizes[1..self.layer_sizes.len() - 1]
            .iter()
            .map(|&s| 2 * s)
            .sum();
        self.trainable_len() + bn_stats
    }

    /// Flattens every parameter including batch-norm running statistics.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.push_trainable(&mut out);
        for bn in &self.bn {
            out.extend(bn.running_mean.iter());
            out.extend(bn.running_var.iter());
        }
        out
    }

    /// Flattens the trainable entries only.
    pub fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_len());
        self.push_trainable(&mut out);
        out
    }

    fn push_trainable(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
        for bn in &self.bn {
            out.extend(bn.gamma.iter());
            out.extend(bn.beta_shift.iter());
        }
    }

    /// Rebuilds parameters with the same shapes from a full flat vector.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ModelParams> {
        if flat.len() != self.flat_len() {
            return Err(Error::Shape(format!(
                "flat length {} does not match expected {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut params = self.clone();
        params.assign_trainable(&flat[..self.trainable_len()])?;
        let mut pos = self.trainable_len();
        for bn in &mut params.bn {
            for dst in [&mut bn.running_mean, &mut bn.running_var] {
                let len = dst.len();
                dst.iter_mut()
                    .zip(&flat[pos..pos + len])
                    .for_each(|(d, &s)| *d = s);
                pos += len;
            }
        }
        Ok(params)
    }

    /// Overwrites the trainable entries from a flat vector.
    pub fn assign_trainable(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_len() {
            return Err(Error::Shape(format!(
                "trainable length {} does not match expected {}",
                flat.len(),
                self.trainable_len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            let wlen = layer.weight.len();
            layer
                .weight
                .iter_mut()
                .zip(&flat[pos..pos + wlen])
                .for_each(|(d, &s)| *d = s);
            pos += wlen;
            let blen = layer.bias.len();
            layer
                .bias
                .iter_mut()
                .zip(&flat[pos..pos + blen])
                .for_each(|(d, &s)| *d = s);
            pos += blen;
        }
        for bn in &mut self.bn {
            for dst in [&mut bn.gamma, &mut bn.beta_shift] {
                let len = dst.len();
                dst.iter_mut()
                    .zip(&flat[pos..pos + len])
                    .for_each(|(d, &s)| *d = s);
                pos += len;
            }
        }
        Ok(())
    }
}

/// Gradients of the loss with respect to the trainable parameters, stored in
/// the trainable flat layout of the [`ModelParams`] they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layer_sizes: Vec<usize>,
    pub flat: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layer_sizes: params.layer_sizes.clone(),
            flat: vec![0.0; params.trainable_len()],
        }
    }

    pub fn congruent_with(&self, params: &ModelParams) -> bool {
        self.layer_sizes == params.layer_sizes && self.flat.len() == params.trainable_len()
    }
}
