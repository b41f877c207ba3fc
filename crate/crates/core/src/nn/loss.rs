//! Class-weighted cross-entropy over two logits.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

fn log_softmax_row(row: &[f64]) -> [f64; 2] {
    let m = row[0].max(row[1]);
    let lse = m + ((row[0] - m).exp() + (row[1] - m).exp()).ln();
    [row[0] - lse, row[1] - lse]
}

/// Weighted cross-entropy: `loss = Σ w_{y_i}·CE_i / Σ w_{y_i}` with a
/// numerically stable log-softmax. Returns the normalized loss and the raw
/// per-sample cross-entropies.
pub fn weighted_cross_entropy(
    logits: ArrayView2<'_, f64>,
    labels: &[u8],
    class_weights: [f64; 2],
) -> Result<(f64, Vec<f64>)> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows vs {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if logits.ncols() != 2 {
        return Err(Error::Shape("logits must have exactly 2 columns".into()));
    }
    let mut weighted_sum = 0.0;
    let mut weight_total = 0.0;
    let mut per_sample = Vec::with_capacity(labels.len());
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let ls = log_softmax_row(&[row[0], row[1]]);
        let ce = -ls[usize::from(y)];
        per_sample.push(ce);
        let w = class_weights[usize::from(y)];
        weighted_sum += w * ce;
        weight_total += w;
    }
    if weight_total == 0.0 {
        return Err(Error::Train(
            "all effective class weights are zero for this batch".into(),
        ));
    }
    Ok((weighted_sum / weight_total, per_sample))
}

/// Softmax probability of the positive class per row.
pub fn positive_probs(logits: ArrayView2<'_, f64>) -> Vec<f64> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let ls = log_softmax_row(&[row[0], row[1]]);
            ls[1].exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn equal_logits_give_ln_two() {
        let logits = array![[0.3, 0.3], [-1.0, -1.0]];
        let (loss, per) = weighted_cross_entropy(logits.view(), &[0, 1], [1.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(per.iter().all(|c| (c - std::f64::consts::LN_2).abs() < 1e-12));
    }

    #[test]
    fn zero_total_weight_is_an_error() {
        let logits = array![[0.5, -0.5], [1.0, 0.0]];
        let res = weighted_cross_entropy(logits.view(), &[0, 0], [0.0, 1.0]);
        assert!(res.is_err());
    }

    #[test]
    fn scalar_log_softmax_oracle() {
        // Single sample, logits [2, 0], label 1: CE = ln(1 + e^2).
        let logits = array![[2.0, 0.0]];
        let (loss, _) = weighted_cross_entropy(logits.view(), &[1], [1.0, 1.0]).unwrap();
        let expected = (1.0 + 2.0f64.exp()).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn loss_is_invariant_under_weight_rescaling() {
        let logits = array![[0.7, -0.2], [0.1, 0.4], [-1.0, 2.0]];
        let labels = [0, 1, 1];
        let (a, _) = weighted_cross_entropy(logits.view(), &labels, [1.0, 5.0]).unwrap();
        let (b, _) = weighted_cross_entropy(logits.view(), &labels, [3.0, 15.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let logits = array![[800.0, -800.0], [-800.0, 800.0]];
        let (loss, per) = weighted_cross_entropy(logits.view(), &[1, 1], [1.0, 1.0]).unwrap();
        assert!(loss.is_finite());
        assert!(per[0] > 1000.0 && per[1].abs() < 1e-12);
    }

    #[test]
    fn positive_probs_match_softmax() {
        let logits = array![[0.0, 0.0], [0.0, 2.0]];
        let p = positive_probs(logits.view());
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
    }
}
