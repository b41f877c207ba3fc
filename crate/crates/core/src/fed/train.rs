//! Client-side local training and shared evaluation helpers.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::fed::ClientUpdate;
use crate::metrics::{confusion, f_beta, MetricsConfig};
use crate::nn::{
    adam_step, backward, forward_eval, forward_train, positive_probs, weighted_cross_entropy,
    AdamState, ModelParams, TrainConfig,
};
use crate::rng::RngStream;

/// Full-shard weighted cross-entropy of `params` in evaluation mode.
pub fn shard_loss(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    class_weights: [f64; 2],
) -> Result<f64> {
    let logits = forward_eval(params, x)?;
    Ok(weighted_cross_entropy(logits.view(), y, class_weights)?.0)
}

/// F-beta of `params` on an evaluation split.
pub fn evaluate_fbeta(
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    metrics: &MetricsConfig,
) -> Result<f64> {
    let logits = forward_eval(params, x)?;
    let probs = positive_probs(logits.view());
    let cm = confusion(&probs, y, metrics.threshold)?;
    Ok(f_beta(&cm, metrics.beta))
}

fn gather(x: ArrayView2<'_, f64>, y: &[u8], idx: &[usize]) -> (Array2<f64>, Vec<u8>) {
    let mut xb = Array2::zeros((idx.len(), x.ncols()));
    let mut yb = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        xb.row_mut(row).assign(&x.row(i));
        yb.push(y[i]);
    }
    (xb, yb)
}

/// Shuffled mini-batch epochs of ADAM on the weighted cross-entropy, shared
/// by per-round client training (fresh optimizer) and continuous solo
/// training (persistent optimizer).
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_epochs(
    params: &mut ModelParams,
    adam: &mut AdamState,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    cfg: &TrainConfig,
    epochs: usize,
    prox_mu: f64,
    anchor_flat: &[f64],
    stream: &mut RngStream,
) -> Result<()> {
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        stream.shuffle(&mut order);
        for batch_idx in order.chunks(cfg.batch_size) {
            if batch_idx.len() < 2 && params.num_hidden() > 0 {
                continue;
            }
            let (xb, yb) = gather(x, y, batch_idx);
            // A mini-batch may carry only zero-weight labels; it contributes
            // nothing to the objective, so skip it.
            let batch_weight: f64 = yb
                .iter()
                .map(|&l| cfg.class_weights[usize::from(l)])
                .sum();
            if batch_weight == 0.0 {
                continue;
            }
            let (_, cache) = forward_train(params, xb.view(), cfg.dropout_rate, stream)?;
            let mut grads = backward(params, &cache, &yb, cfg.class_weights)?;
            if prox_mu != 0.0 {
                let theta = params.flatten_trainable();
                for (g, (t, a)) in grads.flat.iter_mut().zip(theta.iter().zip(anchor_flat)) {
                    *g += prox_mu * (t - a);
                }
            }
            adam_step(adam, params, &grads, cfg.learning_rate, &cfg.adam)?;
        }
    }
    Ok(())
}

/// Runs `epochs` of mini-batch ADAM on the weighted cross-entropy, starting
/// from `global`. When `prox_mu > 0` the gradient gains the proximal pull
/// `prox_mu * (w - w_global)`. ADAM state is freshly initialized per call;
/// the reported `loss_at_global` is the full-shard loss of the incoming
/// model before any update.
///
/// Tail mini-batches of a single row are skipped when the model has batch
/// norm (batch statistics need two rows).
pub fn local_train(
    client_id: usize,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    global: &ModelParams,
    cfg: &TrainConfig,
    epochs: usize,
    prox_mu: f64,
    stream: &mut RngStream,
) -> Result<ClientUpdate> {
    cfg.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Train(format!("client {client_id}: empty shard")));
    }
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "client {client_id}: {} rows vs {} labels",
            x.nrows(),
            y.len()
        )));
    }

    let loss_at_global = shard_loss(global, x, y, cfg.class_weights)?;
    let mut params = global.clone();
    let mut adam = AdamState::new(&params);
    let global_flat = global.flatten_trainable();
    train_epochs(
        &mut params,
        &mut adam,
        x,
        y,
        cfg,
        epochs,
        prox_mu,
        &global_flat,
        stream,
    )?;

    let local_train_loss = if epochs == 0 {
        loss_at_global
    } else {
        shard_loss(&params, x, y, cfg.class_weights)?
    };
    Ok(ClientUpdate {
        client_id,
        new_params: params,
        n_k: x.nrows(),
        loss_at_global,
        local_train_loss,
    })
}
