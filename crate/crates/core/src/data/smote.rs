//! Synthetic minority oversampling: each synthetic sample lies on the segment
//! between a real minority sample and one of its k nearest minority neighbors
//! (Euclidean distance in the feature space as given, which the pipeline has
//! already standardized).

use ndarray::Array2;

use crate::data::{Dataset, ResampleMethod, ResampleSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Oversamples the minority class until its count reaches
/// `ceil(target_minority_ratio * majority_count)`. Originals are retained
/// untouched and synthetic rows are appended; deterministic in `spec.seed`.
pub fn smote(ds: &Dataset, spec: &ResampleSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.method == ResampleMethod::None {
        return Ok(ds.clone());
    }
    if ds.has_missing() {
        return Err(Error::Data("impute before resampling".into()));
    }
    let pos: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == 1).collect();
    let neg: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == 0).collect();
    let (minority_label, minority, majority) = if pos.len() <= neg.len() {
        (1u8, pos, neg)
    } else {
        (0u8, neg, pos)
    };
    if minority.len() < 2 {
        return Err(Error::Data(
            "minority class must have at least 2 samples for SMOTE".into(),
        ));
    }
    let target = (spec.target_minority_ratio * majority.len() as f64).ceil() as usize;
    if minority.len() >= target {
        return Ok(ds.clone());
    }
    let n_new = target - minority.len();
    let k = spec.k_neighbors.min(minority.len() - 1);

    // k nearest minority neighbors per minority sample; ties break on index.
    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(minority.len());
    for &i in &minority {
        let xi = ds.features.row(i);
        let mut dists: Vec<(f64, usize)> = minority
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| {
                let d2: f64 = xi
                    .iter()
                    .zip(ds.features.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, j)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        neighbors.push(dists[..k].iter().map(|&(_, j)| j).collect());
    }

    let mut stream = RngStream::derived(spec.seed, "smote-gen", 0, 0);
    let d = ds.d();
    let mut synth = Array2::zeros((n_new, d));
    let mut synth_groups = Vec::with_capacity(n_new);
    for row in 0..n_new {
        let base_pos = row % minority.len();
        let base = minority[base_pos];
        let nbr = neighbors[base_pos][stream.below(k as u64) as usize];
        let lambda = stream.uniform();
        for j in 0..d {
            let a = ds.features[[base, j]];
            let b = ds.features[[nbr, j]];
            synth[[row, j]] = a + lambda * (b - a);
        }
        if let Some(groups) = &ds.groups {
            synth_groups.push(groups[base]);
        }
    }

    let n_total = ds.n() + n_new;
    let mut features = Array2::zeros((n_total, d));
    features
        .slice_mut(ndarray::s![..ds.n(), ..])
        .assign(&ds.features);
    features.slice_mut(ndarray::s![ds.n().., ..]).assign(&synth);
    let mut labels = ds.labels.clone();
    labels.extend(std::iter::repeat_n(minority_label, n_new));
    let groups = ds.groups.as_ref().map(|g| {
        let mut all = g.clone();
        all.extend(synth_groups);
        all
    });

    Ok(Dataset {
        features,
        labels,
        feature_names: ds.feature_names.clone(),
        missing: Array2::from_elem((n_total, d), false),
        provenance: ds.provenance,
        groups,
        group_names: ds.group_names.clone(),
    })
}
