//! Exact backpropagation through the affine → batch norm → ReLU → dropout
//! stack for the class-weighted cross-entropy loss.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{matmul_nn, matmul_tn};
use crate::nn::forward::ForwardCache;
use crate::nn::params::{Gradients, ModelParams};

fn column_sums(m: &Array2<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(m.ncols());
    for row in m.rows() {
        for (j, &v) in row.iter().enumerate() {
            out[j] += v;
        }
    }
    out
}

/// Gradients of [`crate::nn::weighted_cross_entropy`] with respect to every
/// trainable parameter, from a training-mode forward cache.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    labels: &[u8],
    class_weights: [f64; 2],
) -> Result<Gradients> {
    let batch = cache.logits.nrows();
    if labels.len() != batch {
        return Err(Error::Shape(format!(
            "{batch} cached rows vs {} labels",
            labels.len()
        )));
    }
    if cache.layer_inputs.len() != params.layers.len() || cache.hidden.len() != params.num_hidden()
    {
        return Err(Error::Shape(
            "forward cache does not match parameter structure".into(),
        ));
    }
    for (l, input) in cache.layer_inputs.iter().enumerate() {
        if input.ncols() != params.layer_sizes[l] {
            return Err(Error::Shape(format!(
                "cached input {l} has width {}, expected {}",
                input.ncols(),
                params.layer_sizes[l]
            )));
        }
    }

    let weight_total: f64 = labels
        .iter()
        .map(|&y| class_weights[usize::from(y)])
        .sum();
    if weight_total == 0.0 {
        return Err(Error::Train(
            "all effective class weights are zero for this batch".into(),
        ));
    }

    // d loss / d logits for the normalized weighted cross-entropy.
    let mut g = Array2::zeros((batch, 2));
    for (i, &y) in labels.iter().enumerate() {
        let (l0, l1) = (cache.logits[[i, 0]], cache.logits[[i, 1]]);
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        let z = e0 + e1;
        let w = class_weights[usize::from(y)] / weight_total;
        g[[i, 0]] = w * (e0 / z - f64::from(y == 0));
        g[[i, 1]] = w * (e1 / z - f64::from(y == 1));
    }

    let n_layers = params.layers.len();
    let mut d_weights: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
    let mut d_biases: Vec<Array1<f64>> = Vec::with_capacity(n_layers);
    let mut d_gammas: Vec<Array1<f64>> = Vec::with_capacity(cache.hidden.len());
    let mut d_betas: Vec<Array1<f64>> = Vec::with_capacity(cache.hidden.len());

    for l in (0..n_layers).rev() {
        let input = &cache.layer_inputs[l];
        d_weights.push(matmul_tn(g.view(), input.view()));
        d_biases.push(column_sums(&g));
        if l == 0 {
            break;
        }
        // Gradient w.r.t. the previous hidden layer's post-dropout output.
        let mut da = matmul_nn(g.view(), params.layers[l].weight.view());
        let h = l - 1;
        let hc = &cache.hidden[h];
        if let Some(mask) = &hc.dropout {
            da *= mask;
        }
        // ReLU gate on the batch-norm output.
        for (dv, &bv) in da.iter_mut().zip(hc.bn_out.iter()) {
            if bv <= 0.0 {
                *dv = 0.0;
            }
        }
        // Batch-norm backward (biased batch variance):
        //   dz = gamma * inv_std / B * (B*dy - Σdy - xhat * Σ(dy*xhat))
        let b = da.nrows() as f64;
        let mut sum_dy = Array1::zeros(da.ncols());
        let mut sum_dy_xhat = Array1::zeros(da.ncols());
        for (drow, xrow) in da.rows().into_iter().zip(hc.xhat.rows()) {
            for (j, (&dv, &xv)) in drow.iter().zip(xrow.iter()).enumerate() {
                sum_dy[j] += dv;
                sum_dy_xhat[j] += dv * xv;
            }
        }
        d_gammas.push(sum_dy_xhat.clone());
        d_betas.push(sum_dy.clone());

        let gamma = &params.bn[h].gamma;
        let inv_std = &hc.inv_std;
        let mut dz = Array2::zeros(da.dim());
        for ((mut zrow, drow), xrow) in dz
            .rows_mut()
            .into_iter()
            .zip(da.rows())
            .zip(hc.xhat.rows())
        {
            for (j, zv) in zrow.iter_mut().enumerate() {
                *zv = gamma[j] * inv_std[j] / b
                    * (b * drow[j] - sum_dy[j] - xrow[j] * sum_dy_xhat[j]);
            }
        }
        g = dz;
    }

    d_weights.reverse();
    d_biases.reverse();
    d_gammas.reverse();
    d_betas.reverse();

    let mut flat = Vec::with_capacity(params.trainable_len());
    for (w, b) in d_weights.iter().zip(&d_biases) {
        flat.extend(w.iter());
        flat.extend(b.iter());
    }
    for (ga, be) in d_gammas.iter().zip(&d_betas) {
        flat.extend(ga.iter());
        flat.extend(be.iter());
    }
    Ok(Gradients {
        layer_sizes: params.layer_sizes.clone(),
        flat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::forward::forward_train;
    use crate::nn::loss::weighted_cross_entropy;
    use crate::nn::params::{mlp_init, DenseLayer, ModelParams};
    use crate::rng::RngStream;
    use ndarray::Array2;

    fn loss_of(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: [f64; 2]) -> f64 {
        // Training-mode loss with dropout disabled; batch statistics are a
        // pure function of params and x, so finite differences are valid.
        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (logits, _) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        weighted_cross_entropy(logits.view(), y, w).unwrap().0
    }

    /// Central finite differences over every trainable parameter.
    fn finite_diff(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: [f64; 2]) -> Vec<f64> {
        let theta = params.flatten_trainable();
        let mut grad = vec![0.0; theta.len()];
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            plus[i] += h;
            let mut p_plus = params.clone();
            p_plus.assign_trainable(&plus).unwrap();
            let mut minus = theta.clone();
            minus[i] -= h;
            let mut p_minus = params.clone();
            p_minus.assign_trainable(&minus).unwrap();
            grad[i] = (loss_of(&p_plus, x, y, w) - loss_of(&p_minus, x, y, w)) / (2.0 * h);
        }
        grad
    }

    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut params = mlp_init(&[4, 3, 3, 2], 21).unwrap();
        // Move batch norm off identity so its gradients are exercised.
        for bn in &mut params.bn {
            bn.gamma.mapv_inplace(|g| g * 1.3);
            bn.beta_shift.mapv_inplace(|_| 0.1);
        }
        let mut s = RngStream::new(5);
        let x = Array2::from_shape_fn((5, 4), |_| s.normal());
        let y = [0, 1, 0, 1, 1];
        let w = [0.7, 2.0];

        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (_, cache) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        let grads = backward(&params, &cache, &y, w).unwrap();
        let numeric = finite_diff(&params, &x, &y, w);

        let err = max_rel_err(&grads.flat, &numeric);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn zero_weight_class_raises_error_when_alone() {
        let params = mlp_init(&[3, 2, 2], 2).unwrap();
        let mut s = RngStream::new(6);
        let x = Array2::from_shape_fn((4, 3), |_| s.normal());
        let y = [1, 1, 1, 1];
        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (_, cache) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        // Only label-1 samples with zero weight on class 1: degenerate.
        assert!(backward(&params, &cache, &y, [1.0, 0.0]).is_err());
    }

    #[test]
    fn mixed_batch_with_zero_weight_class_ignores_it() {
        let params = mlp_init(&[3, 2, 2], 2).unwrap();
        let mut s = RngStream::new(6);
        let x = Array2::from_shape_fn((4, 3), |_| s.normal());
        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (_, cache) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        let grads = backward(&params, &cache, &[0, 1, 0, 1], [1.0, 0.0]).unwrap();
        let numeric = finite_diff(&params, &x, &[0, 1, 0, 1], [1.0, 0.0]);
        assert!(max_rel_err(&grads.flat, &numeric) < 1e-4);
    }

    #[test]
    fn linear_model_matches_closed_form_softmax_gradient() {
        // No-hidden-layer variant used only in tests: gradient of the mean CE
        // is (softmax(logits) - onehot(y))ᵀ x / B.
        let params = ModelParams {
            layer_sizes: vec![3, 2],
            layers: vec![DenseLayer {
                weight: ndarray::array![[0.2, -0.1, 0.4], [0.0, 0.3, -0.2]],
                bias: ndarray::array![0.05, -0.05],
            }],
            bn: vec![],
        };
        let x = ndarray::array![[1.0, 2.0, -1.0], [0.5, -0.5, 1.5]];
        let y = [0u8, 1u8];

        let mut p = params.clone();
        let mut stream = RngStream::new(0);
        let (logits, cache) = forward_train(&mut p, x.view(), 0.0, &mut stream).unwrap();
        let grads = backward(&params, &cache, &y, [1.0, 1.0]).unwrap();

        let mut expected_w = ndarray::Array2::<f64>::zeros((2, 3));
        let mut expected_b = ndarray::Array1::<f64>::zeros(2);
        for i in 0..2 {
            let (l0, l1) = (logits[[i, 0]], logits[[i, 1]]);
            let m = l0.max(l1);
            let z = (l0 - m).exp() + (l1 - m).exp();
            let p0 = (l0 - m).exp() / z;
            let probs = [p0, 1.0 - p0];
            for c in 0..2 {
                let delta = (probs[c] - f64::from(y[i] as usize == c)) / 2.0;
                expected_b[c] += delta;
                for j in 0..3 {
                    expected_w[[c, j]] += delta * x[[i, j]];
                }
            }
        }
        let mut expected: Vec<f64> = Vec::new();
        expected.extend(expected_w.iter());
        expected.extend(expected_b.iter());
        for (&a, &e) in grads.flat.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }
}
