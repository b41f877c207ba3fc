//! Imputation, standardization, and splitting. All statistics come from the
//! training split only; validation and test data are transformed with the
//! stored training statistics.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Fills missing cells with per-feature medians computed on `train`, applies
/// the same medians to `others`, and clears all missing masks. Returns the
/// medians. Errors if a feature has no observed value in `train`.
pub fn impute_median(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<Vec<f64>> {
    if train.n() == 0 {
        return Err(Error::Data("training split is empty".into()));
    }
    let d = train.d();
    let mut medians = Vec::with_capacity(d);
    for j in 0..d {
        let mut observed: Vec<f64> = (0..train.n())
            .filter(|&i| !train.missing[[i, j]])
            .map(|i| train.features[[i, j]])
            .collect();
        if observed.is_empty() {
            return Err(Error::Data(format!(
                "feature {:?} has no observed training value to impute from",
                train.feature_names[j]
            )));
        }
        observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = observed.len() / 2;
        let median = if observed.len() % 2 == 1 {
            observed[mid]
        } else {
            0.5 * (observed[mid - 1] + observed[mid])
        };
        medians.push(median);
    }
    let fill = |ds: &mut Dataset| {
        for i in 0..ds.n() {
            for (j, &m) in medians.iter().enumerate() {
                if ds.missing[[i, j]] {
                    ds.features[[i, j]] = m;
                    ds.missing[[i, j]] = false;
                }
            }
        }
    };
    fill(train);
    for ds in others {
        fill(ds);
    }
    Ok(medians)
}

/// Per-feature mean and reciprocal standard deviation from a training split.
/// Constant features carry scale 0, so they map to all-zero columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ScalerStats {
    pub fn transform_value(&self, feature: usize, x: f64) -> f64 {
        (x - self.mean[feature]) * self.scale[feature]
    }
}

/// Standardizes each feature to zero mean and unit variance using training
/// statistics (population variance). Applies the same transform to `others`.
pub fn standardize(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<ScalerStats> {
    if train.n() == 0 {
        return Err(Error::Data("training split is empty".into()));
    }
    let n = train.n() as f64;
    let d = train.d();
    let mut mean = vec![0.0; d];
    for row in train.features.rows() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for row in train.features.rows() {
        for (j, &v) in row.iter().enumerate() {
            let c = v - mean[j];
            var[j] += c * c;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|&v| {
            let std = (v / n).sqrt();
            if std > 0.0 {
                1.0 / std
            } else {
                0.0
            }
        })
        .collect();

    let stats = ScalerStats { mean, scale };
    let apply = |ds: &mut Dataset| {
        for mut row in ds.features.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - stats.mean[j]) * stats.scale[j];
            }
        }
    };
    apply(train);
    for ds in others {
        apply(ds);
    }
    Ok(stats)
}

fn largest_remainder_counts(n: usize, fracs: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = fracs.iter().map(|f| (n as f64 * f).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = fracs
        .iter()
        .enumerate()
        .map(|(i, f)| (i, n as f64 * f - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n - assigned {
        counts[remainders[k % fracs.len()].0] += 1;
    }
    counts
}

/// Splits a dataset into train/validation/test. Stratified mode allocates per
/// class with largest-remainder rounding, preserving the positive fraction in
/// each split within one sample per class. Deterministic in `spec.seed`.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if ds.n() < 10 {
        return Err(Error::Data("need at least 10 samples to split".into()));
    }
    let fracs = [spec.train_frac, spec.val_frac, spec.test_frac];
    let mut stream = RngStream::derived(spec.seed, "split", 0, 0);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    if spec.stratified {
        for class in [0u8, 1u8] {
            let mut idx: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
            if idx.is_empty() {
                continue;
            }
            let counts = largest_remainder_counts(idx.len(), &fracs);
            if counts.contains(&0) {
                return Err(Error::Data(format!(
                    "stratified split would leave a split without class-{class} samples"
                )));
            }
            stream.shuffle(&mut idx);
            let mut start = 0;
            for (p, &c) in counts.iter().enumerate() {
                parts[p].extend(&idx[start..start + c]);
                start += c;
            }
        }
    } else {
        let mut idx: Vec<usize> = (0..ds.n()).collect();
        stream.shuffle(&mut idx);
        let counts = largest_remainder_counts(ds.n(), &fracs);
        let mut start = 0;
        for (p, &c) in counts.iter().enumerate() {
            parts[p].extend(&idx[start..start + c]);
            start += c;
        }
    }

    for p in &mut parts {
        p.sort_unstable();
    }
    Ok((
        ds.subset(&parts[0]),
        ds.subset(&parts[1]),
        ds.subset(&parts[2]),
    ))
}
