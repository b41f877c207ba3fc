//! Forward pass. Hidden layers apply affine → batch norm → ReLU → dropout
//! (dropout in training mode only); the output layer is a plain affine map to
//! two logits.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::matmul_nt;
use crate::nn::params::ModelParams;
use crate::rng::RngStream;

/// Numerical floor inside the batch-norm square root.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistic update rate: `running = (1 - m) * running + m * batch`.
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-hidden-layer values saved for the backward pass.
#[derive(Debug, Clone)]
pub struct HiddenCache {
    /// Normalized activations (z - mean) / sqrt(var + eps).
    pub xhat: Array2<f64>,
    /// 1 / sqrt(var + eps) per feature.
    pub inv_std: Array1<f64>,
    /// Batch-norm output before ReLU.
    pub bn_out: Array2<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)); `None` when rate is 0.
    pub dropout: Option<Array2<f64>>,
}

/// Values captured by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each affine layer (index aligned with `params.layers`).
    pub layer_inputs: Vec<Array2<f64>>,
    pub hidden: Vec<HiddenCache>,
    pub logits: Array2<f64>,
}

fn check_input(params: &ModelParams, batch: &ArrayView2<'_, f64>) -> Result<()> {
    if batch.ncols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} features, model expects {}",
            batch.ncols(),
            params.input_dim()
        )));
    }
    if batch.nrows() == 0 {
        return Err(Error::Shape("batch must contain at least one row".into()));
    }
    Ok(())
}

fn affine(input: &Array2<f64>, layer: &crate::nn::params::DenseLayer) -> Array2<f64> {
    let mut z = matmul_nt(input.view(), layer.weight.view());
    for mut row in z.rows_mut() {
        row += &layer.bias;
    }
    z
}

/// Training-mode forward pass. Batch statistics normalize each hidden layer
/// and the running statistics of `params` advance by [`BN_MOMENTUM`].
/// Requires a batch of at least two rows when hidden layers are present.
pub fn forward_train(
    params: &mut ModelParams,
    batch: ArrayView2<'_, f64>,
    dropout_rate: f64,
    stream: &mut RngStream,
) -> Result<(Array2<f64>, ForwardCache)> {
    check_input(params, &batch)?;
    if params.num_hidden() > 0 && batch.nrows() < 2 {
        return Err(Error::Train(
            "training-mode batch norm needs a batch of at least 2 rows".into(),
        ));
    }
    let b = batch.nrows() as f64;
    let mut layer_inputs = Vec::with_capacity(params.layers.len());
    let mut hidden = Vec::with_capacity(params.num_hidden());
    let mut activ = batch.to_owned();

    for h in 0..params.num_hidden() {
        layer_inputs.push(activ.clone());
        let z = affine(&activ, &params.layers[h]);

        let mean = z.sum_axis(Axis(0)) / b;
        let mut var = Array1::zeros(z.ncols());
        for row in z.rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        var /= b;
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());

        let bn = &mut params.bn[h];
        for j in 0..mean.len() {
            bn.running_mean[j] = (1.0 - BN_MOMENTUM) * bn.running_mean[j] + BN_MOMENTUM * mean[j];
            bn.running_var[j] = (1.0 - BN_MOMENTUM) * bn.running_var[j] + BN_MOMENTUM * var[j];
        }

        let mut xhat = z;
        for mut row in xhat.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let mut bn_out = xhat.clone();
        for mut row in bn_out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = bn.gamma[j] * *v + bn.beta_shift[j];
            }
        }

        let mut out = bn_out.mapv(|v| v.max(0.0));
        let dropout = if dropout_rate > 0.0 {
            let keep_scale = 1.0 / (1.0 - dropout_rate);
            let mask = Array2::from_shape_fn(out.dim(), |_| {
                if stream.uniform() < dropout_rate {
                    0.0
                } else {
                    keep_scale
                }
            });
            out *= &mask;
            Some(mask)
        } else {
            None
        };

        hidden.push(HiddenCache {
            xhat,
            inv_std,
            bn_out,
            dropout,
        });
        activ = out;
    }

    layer_inputs.push(activ.clone());
    let logits = affine(&activ, params.layers.last().unwrap());
    let cache = ForwardCache {
        layer_inputs,
        hidden,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// Evaluation-mode forward pass: running statistics normalize, dropout is
/// disabled. Pure function of `(params, batch)`.
pub fn forward_eval(params: &ModelParams, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_input(params, &batch)?;
    let mut activ = batch.to_owned();
    for h in 0..params.num_hidden() {
        let mut z = affine(&activ, &params.layers[h]);
        let bn = &params.bn[h];
        for mut row in z.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let norm = (*v - bn.running_mean[j]) / (bn.running_var[j] + BN_EPS).sqrt();
                *v = (bn.gamma[j] * norm + bn.beta_shift[j]).max(0.0);
            }
        }
        activ = z;
    }
    Ok(affine(&activ, params.layers.last().unwrap()))
}
