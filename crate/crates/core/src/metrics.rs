//! Confusion-matrix statistics, cost-ratio F-beta scoring, and the
//! entropy-based fairness metric over per-client scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// FN:FP misclassification cost ratio.
    pub beta: f64,
    /// Decision threshold on the positive-class probability.
    pub threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            threshold: 0.5,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config("beta must be positive and finite".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Tallies predictions at `threshold`: a sample is predicted positive iff its
/// probability is >= the threshold.
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if probs.is_empty() {
        return Err(Error::Data("cannot evaluate an empty prediction set".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Data(format!("probability {p} outside [0, 1]")));
        }
        match (p >= threshold, y == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// F-beta score: `(1 + β²)·P·R / (β²·P + R)`, with F = 0 whenever tp = 0
/// (covers the 0/0 cases of degenerate predictions).
pub fn f_beta(cm: &ConfusionMatrix, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    if cm.tp == 0 {
        return 0.0;
    }
    let precision = cm.tp as f64 / (cm.tp + cm.fp) as f64;
    let recall = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    let b2 = beta * beta;
    (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

/// Base-2 entropy of the normalized score distribution across clients.
/// All-zero scores count as uniform (maximal) by convention; range is
/// `[0, log2 K]`.
pub fn fairness_entropy(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Config("need at least one client score".into()));
    }
    if scores.iter().any(|&s| s < 0.0) {
        return Err(Error::Config("scores must be non-negative".into()));
    }
    let total: f64 = scores.iter().sum();
    let k = scores.len() as f64;
    if total == 0.0 {
        return Ok(k.log2());
    }
    let mut h = 0.0;
    for &s in scores {
        if s > 0.0 {
            let p = s / total;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_predictions_on_all_positive_labels() {
        let cm = confusion(&[1.0, 1.0, 1.0], &[1, 1, 1], 0.5).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 3,
                fp: 0,
                tn: 0,
                fn_: 0
            }
        );
    }

    #[test]
    fn threshold_boundary_counts_as_positive() {
        let cm = confusion(&[0.5], &[0], 0.5).unwrap();
        assert_eq!(cm.fp, 1);
        assert_eq!(cm.tn, 0);
    }

    #[test]
    fn mixed_case_matches_hand_tally() {
        // preds at 0.5: [1, 0, 1, 0, 1, 0]; labels [1, 1, 0, 0, 1, 1]
        let probs = [0.9, 0.2, 0.7, 0.1, 0.5, 0.49];
        let labels = [1, 1, 0, 0, 1, 1];
        let cm = confusion(&probs, &labels, 0.5).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 2,
                fp: 1,
                tn: 1,
                fn_: 2
            }
        );
        assert_eq!(cm.total(), 6);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(confusion(&[], &[], 0.5).is_err());
    }

    #[test]
    fn perfect_classifier_scores_one_for_any_beta() {
        let cm = ConfusionMatrix {
            tp: 10,
            fp: 0,
            tn: 90,
            fn_: 0,
        };
        for beta in [0.5, 1.0, 30.0, 50.0] {
            assert_eq!(f_beta(&cm, beta), 1.0);
        }
    }

    #[test]
    fn f_beta_closed_form_cases() {
        let cm = ConfusionMatrix {
            tp: 1,
            fp: 1,
            tn: 0,
            fn_: 0,
        };
        assert!((f_beta(&cm, 1.0) - 2.0 / 3.0).abs() < 1e-12);

        let cm = ConfusionMatrix {
            tp: 1,
            fp: 9,
            tn: 0,
            fn_: 0,
        };
        let expected = 2501.0 * 0.1 / (2500.0 * 0.1 + 1.0);
        assert!((f_beta(&cm, 50.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_tp_scores_zero() {
        let cm = ConfusionMatrix {
            tp: 0,
            fp: 5,
            tn: 5,
            fn_: 3,
        };
        assert_eq!(f_beta(&cm, 30.0), 0.0);
        let cm = ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 10,
            fn_: 0,
        };
        assert_eq!(f_beta(&cm, 1.0), 0.0);
    }

    #[test]
    fn f_beta_invariant_under_count_scaling() {
        let cm = ConfusionMatrix {
            tp: 3,
            fp: 2,
            tn: 10,
            fn_: 1,
        };
        let scaled = ConfusionMatrix {
            tp: 30,
            fp: 20,
            tn: 100,
            fn_: 10,
        };
        for beta in [0.5, 1.0, 7.0] {
            assert!((f_beta(&cm, beta) - f_beta(&scaled, beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn f1_matches_classical_formula() {
        let cm = ConfusionMatrix {
            tp: 6,
            fp: 2,
            tn: 5,
            fn_: 4,
        };
        let p = 6.0 / 8.0;
        let r = 6.0 / 10.0;
        let f1 = 2.0 * p * r / (p + r);
        assert!((f_beta(&cm, 1.0) - f1).abs() < 1e-12);
    }

    #[test]
    fn large_beta_approaches_recall() {
        let cm = ConfusionMatrix {
            tp: 8,
            fp: 50,
            tn: 100,
            fn_: 2,
        };
        let recall = 0.8;
        let mut last = f_beta(&cm, 1.0);
        for beta in [2.0, 5.0, 20.0, 100.0, 1000.0] {
            let f = f_beta(&cm, beta);
            assert!(f > last, "f_beta should increase toward recall");
            last = f;
        }
        assert!((last - recall).abs() < 1e-3);
    }

    #[test]
    fn equal_scores_maximize_entropy() {
        let h = fairness_entropy(&[0.7, 0.7, 0.7, 0.7]).unwrap();
        assert_eq!(h, 2.0);
    }

    #[test]
    fn degenerate_distribution_has_zero_entropy() {
        assert_eq!(fairness_entropy(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn all_zero_scores_count_as_uniform() {
        let h = fairness_entropy(&[0.0; 8]).unwrap();
        assert!((h - 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_permutation_and_scale_invariant() {
        let a = fairness_entropy(&[0.2, 0.5, 0.9]).unwrap();
        let b = fairness_entropy(&[0.9, 0.2, 0.5]).unwrap();
        let c = fairness_entropy(&[0.4, 1.0, 1.8]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn negative_scores_are_rejected() {
        assert!(fairness_entropy(&[0.3, -0.1]).is_err());
    }
}
