//! Assignment of training samples to simulated clients: i.i.d., feature-
//! distribution skew along the first principal component, quantity skew from
//! Dirichlet proportions, and natural grouping for data that carries client
//! groups.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Iid,
    FeatureSkewPca,
    QuantitySkewDirichlet,
    NaturalGroups,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub scheme: Scheme,
    pub num_clients: usize,
    /// Dirichlet concentration; only read for quantity skew.
    pub alpha: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Config("need at least one client".into()));
        }
        if self.scheme == Scheme::QuantitySkewDirichlet && !(self.alpha > 0.0) {
            return Err(Error::Config("dirichlet alpha must be > 0".into()));
        }
        Ok(())
    }
}

/// Scheme-specific details recorded alongside the assignment for inspection
/// and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeMeta {
    Iid,
    FeatureSkewPca {
        direction: Vec<f64>,
        /// Position in the sorted PC1 order where each client's block starts.
        cut_points: Vec<usize>,
    },
    QuantitySkewDirichlet {
        alpha: f64,
        proportions: Vec<f64>,
    },
    NaturalGroups {
        group_names: Vec<String>,
    },
}

/// Disjoint, exhaustive assignment of training indices to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub scheme: Scheme,
    pub seed: u64,
    pub clients: Vec<Vec<usize>>,
    pub meta: SchemeMeta,
}

impl PartitionPlan {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// Verifies the disjoint-and-exhaustive property over `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        let mut count = 0;
        for client in &self.clients {
            for &i in client {
                if i >= n || seen[i] {
                    return false;
                }
                seen[i] = true;
                count += 1;
            }
        }
        count == n
    }
}

/// Splits a random permutation of `0..n` into K blocks whose sizes differ by
/// at most one.
pub fn partition_iid(n: usize, num_clients: usize, seed: u64) -> Result<PartitionPlan> {
    if num_clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    if n < num_clients {
        return Err(Error::Config(format!(
            "cannot spread {n} samples over {num_clients} clients"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stream = RngStream::derived(seed, "partition-iid", 0, 0);
    stream.shuffle(&mut idx);
    let base = n / num_clients;
    let extra = n % num_clients;
    let mut clients = Vec::with_capacity(num_clients);
    let mut start = 0;
    for k in 0..num_clients {
        let size = base + usize::from(k < extra);
        clients.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(PartitionPlan {
        scheme: Scheme::Iid,
        seed,
        clients,
        meta: SchemeMeta::Iid,
    })
}

/// First principal component of the covariance of `x` by power iteration.
/// The sign is fixed by making the largest-magnitude loading positive.
pub fn first_principal_component(x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::Data("need at least two rows for a principal component".into()));
    }
    let mean = x.sum_axis(ndarray::Axis(0)) / n as f64;
    let mut cov = Array2::<f64>::zeros((d, d));
    for row in x.rows() {
        let c: Vec<f64> = row.iter().zip(&mean).map(|(v, m)| v - m).collect();
        for i in 0..d {
            if c[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                cov[[i, j]] += c[i] * c[j];
            }
        }
    }
    cov /= (n - 1) as f64;
    let total_var: f64 = (0..d).map(|i| cov[[i, i]]).sum();
    if total_var <= 0.0 {
        return Err(Error::Data(
            "degenerate covariance: all rows are identical".into(),
        ));
    }

    // Deterministic start: per-column variances, generically not orthogonal
    // to the leading eigenvector.
    let mut v: Vec<f64> = (0..d).map(|i| cov[[i, i]] + 1e-12).collect();
    let norm = |u: &[f64]| u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);

    for _ in 0..1000 {
        let mut next = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += cov[[i, j]] * v[j];
            }
            next[i] = acc;
        }
        let nn = norm(&next);
        if nn == 0.0 {
            return Err(Error::Data("power iteration collapsed to zero".into()));
        }
        next.iter_mut().for_each(|a| *a /= nn);
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let flipped: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta.min(flipped) < 1e-9 {
            break;
        }
    }

    // Sign convention: largest-magnitude loading is positive.
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap().then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    Ok(Array1::from(v))
}

/// Sorts samples by their PC1 score and cuts the order into K contiguous
/// blocks of near-equal size. Ties in score break on the original index.
pub fn partition_feature_skew(ds: &Dataset, num_clients: usize) -> Result<PartitionPlan> {
    if num_clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    let n = ds.n();
    if n < num_clients {
        return Err(Error::Config(format!(
            "cannot spread {n} samples over {num_clients} clients"
        )));
    }
    let direction = first_principal_component(ds.features.view())?;
    let scores: Vec<f64> = ds
        .features
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&direction).map(|(a, b)| a * b).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let base = n / num_clients;
    let extra = n % num_clients;
    let mut clients = Vec::with_capacity(num_clients);
    let mut cut_points = Vec::with_capacity(num_clients);
    let mut start = 0;
    for k in 0..num_clients {
        let size = base + usize::from(k < extra);
        cut_points.push(start);
        clients.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(PartitionPlan {
        scheme: Scheme::FeatureSkewPca,
        seed: 0,
        clients,
        meta: SchemeMeta::FeatureSkewPca {
            direction: direction.to_vec(),
            cut_points,
        },
    })
}

/// Draws client proportions from a symmetric Dirichlet, converts them to
/// counts by largest-remainder rounding, and deals out shuffled indices.
/// Redraws (up to 100 times) if any client would be empty.
pub fn partition_quantity_skew(
    n: usize,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    if num_clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    if n < num_clients {
        return Err(Error::Config(format!(
            "cannot spread {n} samples over {num_clients} clients"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::Config("dirichlet alpha must be > 0".into()));
    }
    let mut stream = RngStream::derived(seed, "partition-dirichlet", 0, 0);
    let mut chosen = None;
    for _ in 0..100 {
        let proportions = stream.dirichlet(alpha, num_clients);
        let mut counts: Vec<usize> = proportions
            .iter()
            .map(|p| (n as f64 * p).floor() as usize)
            .collect();
        let assigned: usize = counts.iter().sum();
        let mut rem: Vec<(usize, f64)> = proportions
            .iter()
            .enumerate()
            .map(|(k, p)| (k, n as f64 * p - counts[k] as f64))
            .collect();
        rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for i in 0..n - assigned {
            counts[rem[i].0] += 1;
        }
        if counts.iter().all(|&c| c >= 1) {
            chosen = Some((proportions, counts));
            break;
        }
    }
    let Some((proportions, counts)) = chosen else {
        return Err(Error::Train(format!(
            "dirichlet draw left an empty client 100 times (alpha={alpha}, K={num_clients})"
        )));
    };

    let mut idx: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut idx);
    let mut clients = Vec::with_capacity(num_clients);
    let mut start = 0;
    for &c in &counts {
        clients.push(idx[start..start + c].to_vec());
        start += c;
    }
    Ok(PartitionPlan {
        scheme: Scheme::QuantitySkewDirichlet,
        seed,
        clients,
        meta: SchemeMeta::QuantitySkewDirichlet {
            alpha,
            proportions,
        },
    })
}

/// One client per natural group, in declared group order.
pub fn partition_natural(ds: &Dataset) -> Result<PartitionPlan> {
    let Some(groups) = &ds.groups else {
        return Err(Error::Data(
            "dataset carries no group column for natural partitioning".into(),
        ));
    };
    let num_groups = ds.group_names.len().max(
        groups.iter().map(|&g| g as usize + 1).max().unwrap_or(0),
    );
    if num_groups == 0 {
        return Err(Error::Data("no groups present".into()));
    }
    let mut clients = vec![Vec::new(); num_groups];
    for (i, &g) in groups.iter().enumerate() {
        clients[g as usize].push(i);
    }
    Ok(PartitionPlan {
        scheme: Scheme::NaturalGroups,
        seed: 0,
        clients,
        meta: SchemeMeta::NaturalGroups {
            group_names: ds.group_names.clone(),
        },
    })
}

/// Dispatches on the scheme in `spec`.
pub fn partition(ds: &Dataset, spec: &PartitionSpec) -> Result<PartitionPlan> {
    spec.validate()?;
    match spec.scheme {
        Scheme::Iid => partition_iid(ds.n(), spec.num_clients, spec.seed),
        Scheme::FeatureSkewPca => partition_feature_skew(ds, spec.num_clients),
        Scheme::QuantitySkewDirichlet => {
            partition_quantity_skew(ds.n(), spec.num_clients, spec.alpha, spec.seed)
        }
        Scheme::NaturalGroups => {
            let plan = partition_natural(ds)?;
            if plan.num_clients() != spec.num_clients {
                return Err(Error::Config(format!(
                    "natural grouping yields {} clients but the config says {}",
                    plan.num_clients(),
                    spec.num_clients
                )));
            }
            if plan.clients.iter().any(|c| c.is_empty()) {
                return Err(Error::Data("a declared group has no samples".into()));
            }
            Ok(plan)
        }
    }
}
