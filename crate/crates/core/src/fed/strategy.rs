//! Server aggregation strategies.
//!
//! All strategies consume the clients' full parameter vectors. Trainable
//! entries follow the strategy's update rule; batch-norm running statistics
//! are always combined by the sample-count-weighted average (aggregating
//! optimizer state into running statistics would corrupt them).
//!
//! Updates are sorted by client id before any floating-point reduction, so
//! aggregation output is bit-identical under permutation of the input list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fed::ClientUpdate;
use crate::nn::ModelParams;

/// Guard on the loss power at F_k = 0.
const LOSS_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    FedAvg,
    FedProx,
    QFedAvg,
    FedYogi,
}

/// Per-strategy knobs; only the fields of the active strategy are read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// FedProx proximal coefficient.
    pub mu: f64,
    /// qFedAvg fairness exponent.
    pub q: f64,
    /// qFedAvg Lipschitz scale (the cited estimate is 1 / client learning rate).
    pub lipschitz: f64,
    /// FedYogi global learning rate.
    pub eta_g: f64,
    /// FedYogi adaptivity floor.
    pub tau: f64,
    pub server_beta1: f64,
    pub server_beta2: f64,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        match self.strategy {
            Strategy::FedAvg => {}
            Strategy::FedProx => {
                if self.mu < 0.0 {
                    return Err(Error::Config("fedprox mu must be >= 0".into()));
                }
            }
            Strategy::QFedAvg => {
                if self.q < 0.0 {
                    return Err(Error::Config("qfedavg q must be >= 0".into()));
                }
                if !(self.lipschitz > 0.0) {
                    return Err(Error::Config("qfedavg lipschitz must be > 0".into()));
                }
            }
            Strategy::FedYogi => {
                if !(self.eta_g > 0.0) {
                    return Err(Error::Config("fedyogi eta_g must be > 0".into()));
                }
                if !(self.tau > 0.0) {
                    return Err(Error::Config("fedyogi tau must be > 0".into()));
                }
                for (name, b) in [
                    ("server_beta1", self.server_beta1),
                    ("server_beta2", self.server_beta2),
                ] {
                    if !(0.0..1.0).contains(&b) {
                        return Err(Error::Config(format!("fedyogi {name} must be in (0, 1)")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// FedYogi server optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerOptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub round: u64,
}

impl ServerOptState {
    /// Fresh state with the second moment at tau².
    pub fn new(trainable_len: usize, tau: f64) -> Self {
        Self {
            m: vec![0.0; trainable_len],
            v: vec![tau * tau; trainable_len],
            round: 0,
        }
    }
}

fn sorted_refs(updates: &[ClientUpdate]) -> Result<Vec<&ClientUpdate>> {
    if updates.is_empty() {
        return Err(Error::Train("cannot aggregate an empty update list".into()));
    }
    let first = &updates[0].new_params;
    for u in updates {
        if !u.new_params.same_shape(first) {
            return Err(Error::Shape("client updates disagree on model shape".into()));
        }
        if u.n_k == 0 {
            return Err(Error::Train("client reported a zero sample count".into()));
        }
    }
    let mut refs: Vec<&ClientUpdate> = updates.iter().collect();
    refs.sort_by_key(|u| u.client_id);
    Ok(refs)
}

/// Sample-count-weighted average of the full parameter vectors (trainable
/// entries and batch-norm running statistics alike).
pub fn aggregate_fedavg(updates: &[ClientUpdate]) -> Result<ModelParams> {
    let refs = sorted_refs(updates)?;
    let total: f64 = refs.iter().map(|u| u.n_k as f64).sum();
    let mut acc = vec![0.0; refs[0].new_params.flat_len()];
    for u in &refs {
        let w = u.n_k as f64 / total;
        for (a, p) in acc.iter_mut().zip(u.new_params.flatten()) {
            *a += w * p;
        }
    }
    refs[0].new_params.unflatten(&acc)
}

/// Weighted average of batch-norm running statistics only; returns the full
/// flat vector of `base` with its running-stat tail replaced.
fn averaged_running_stats(refs: &[&ClientUpdate]) -> Vec<f64> {
    let base = &refs[0].new_params;
    let trainable = base.trainable_len();
    let total: f64 = refs.iter().map(|u| u.n_k as f64).sum();
    let mut tail = vec![0.0; base.flat_len() - trainable];
    for u in refs {
        let w = u.n_k as f64 / total;
        let flat = u.new_params.flatten();
        for (t, &p) in tail.iter_mut().zip(&flat[trainable..]) {
            *t += w * p;
        }
    }
    tail
}

/// Loss-reweighted aggregation: clients with higher local loss pull the
/// global model harder. With q = 0 this reduces to the unweighted mean of
/// the client models.
pub fn aggregate_qfedavg(
    global: &ModelParams,
    updates: &[ClientUpdate],
    q: f64,
    lipschitz: f64,
) -> Result<ModelParams> {
    if !(lipschitz > 0.0) {
        return Err(Error::Config("lipschitz must be > 0".into()));
    }
    if q < 0.0 {
        return Err(Error::Config("q must be >= 0".into()));
    }
    let refs = sorted_refs(updates)?;
    if !refs[0].new_params.same_shape(global) {
        return Err(Error::Shape("updates do not match the global model".into()));
    }
    let g = global.flatten_trainable();
    let mut numer = vec![0.0; g.len()];
    let mut denom = 0.0;
    for u in &refs {
        if u.loss_at_global < 0.0 {
            return Err(Error::Train("negative client loss".into()));
        }
        let f = u.loss_at_global + LOSS_EPS;
        let fq = f.powf(q);
        let w_k = u.new_params.flatten_trainable();
        let mut norm2 = 0.0;
        for (i, (&gi, &wi)) in g.iter().zip(&w_k).enumerate() {
            let delta = lipschitz * (gi - wi);
            norm2 += delta * delta;
            numer[i] += fq * delta;
        }
        denom += q * f.powf(q - 1.0) * norm2 + lipschitz * fq;
    }
    let mut new_trainable = g;
    for (t, nu) in new_trainable.iter_mut().zip(&numer) {
        *t -= nu / denom;
    }

    let mut flat = new_trainable;
    flat.extend(averaged_running_stats(&refs));
    global.unflatten(&flat)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Server-side adaptive aggregation: momentum plus a sign-controlled second
/// moment applied to the sample-weighted mean client delta.
pub fn aggregate_fedyogi(
    global: &ModelParams,
    updates: &[ClientUpdate],
    state: &mut ServerOptState,
    eta_g: f64,
    tau: f64,
    betas: (f64, f64),
) -> Result<ModelParams> {
    let refs = sorted_refs(updates)?;
    if !refs[0].new_params.same_shape(global) {
        return Err(Error::Shape("updates do not match the global model".into()));
    }
    let g = global.flatten_trainable();
    if state.m.len() != g.len() || state.v.len() != g.len() {
        return Err(Error::Shape("server state is not shape-congruent".into()));
    }
    if state.v.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Train("server second moment must stay positive".into()));
    }
    let (beta1, beta2) = betas;
    let total: f64 = refs.iter().map(|u| u.n_k as f64).sum();

    let mut delta = vec![0.0; g.len()];
    for u in &refs {
        let w = u.n_k as f64 / total;
        for (d, (&wi, &gi)) in delta
            .iter_mut()
            .zip(u.new_params.flatten_trainable().iter().zip(&g))
        {
            *d += w * (wi - gi);
        }
    }

    let mut new_trainable = g;
    for i in 0..new_trainable.len() {
        let d = delta[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * d;
        let d2 = d * d;
        state.v[i] -= (1.0 - beta2) * d2 * sign(state.v[i] - d2);
        new_trainable[i] += eta_g * state.m[i] / (state.v[i].sqrt() + tau);
    }
    state.round += 1;

    let mut flat = new_trainable;
    flat.extend(averaged_running_stats(&refs));
    global.unflatten(&flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_init;

    /// Model with every trainable entry set to `x` (running stats default).
    fn constant_model(x: f64) -> ModelParams {
        let mut p = mlp_init(&[1, 2, 2], 0).unwrap();
        let flat = vec![x; p.trainable_len()];
        p.assign_trainable(&flat).unwrap();
        p
    }

    fn update(client_id: usize, params: ModelParams, n_k: usize, loss: f64) -> ClientUpdate {
        ClientUpdate {
            client_id,
            new_params: params,
            n_k,
            loss_at_global: loss,
            local_train_loss: loss,
        }
    }

    #[test]
    fn single_client_average_is_identity() {
        let p = constant_model(0.37);
        let out = aggregate_fedavg(&[update(0, p.clone(), 10, 0.5)]).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn equal_counts_give_the_midpoint() {
        let out = aggregate_fedavg(&[
            update(0, constant_model(1.0), 7, 0.5),
            update(1, constant_model(3.0), 7, 0.5),
        ])
        .unwrap();
        assert!(out.flatten_trainable().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    #[test]
    fn counts_weight_the_average() {
        // n = (1, 3), values 0 and 4 -> 0*0.25 + 4*0.75 = 3.
        let out = aggregate_fedavg(&[
            update(0, constant_model(0.0), 1, 0.5),
            update(1, constant_model(4.0), 3, 0.5),
        ])
        .unwrap();
        assert!(out.flatten_trainable().iter().all(|&v| (v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn empty_update_list_is_rejected() {
        assert!(aggregate_fedavg(&[]).is_err());
        let g = constant_model(0.0);
        assert!(aggregate_qfedavg(&g, &[], 0.0, 1.0).is_err());
    }

    #[test]
    fn aggregation_is_permutation_invariant_bitwise() {
        let a = update(0, constant_model(0.25), 3, 0.9);
        let b = update(1, constant_model(-1.5), 11, 0.2);
        let c = update(2, constant_model(2.0), 5, 0.4);
        let fwd = aggregate_fedavg(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = aggregate_fedavg(&[c.clone(), a.clone(), b.clone()]).unwrap();
        assert_eq!(fwd.flatten(), rev.flatten());

        let g = constant_model(0.0);
        let fwd = aggregate_qfedavg(&g, &[a.clone(), b.clone(), c.clone()], 1.0, 2.0).unwrap();
        let rev = aggregate_qfedavg(&g, &[b, c, a], 1.0, 2.0).unwrap();
        assert_eq!(fwd.flatten(), rev.flatten());
    }

    #[test]
    fn fedavg_stays_in_the_convex_envelope() {
        let ups = vec![
            update(0, constant_model(-1.0), 2, 0.5),
            update(1, constant_model(0.5), 9, 0.5),
            update(2, constant_model(2.0), 4, 0.5),
        ];
        let out = aggregate_fedavg(&ups).unwrap();
        for &v in &out.flatten_trainable() {
            assert!((-1.0..=2.0).contains(&v));
        }
    }

    #[test]
    fn qfedavg_with_q_zero_is_the_unweighted_mean() {
        let g = constant_model(0.0);
        let ups = vec![
            update(0, constant_model(1.0), 1, 2.0),
            update(1, constant_model(3.0), 99, 0.01),
        ];
        let out = aggregate_qfedavg(&g, &ups, 0.0, 123.4).unwrap();
        // Mean of 1 and 3 regardless of n_k or losses.
        for &v in &out.flatten_trainable() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qfedavg_fixed_point_on_zero_deltas() {
        let g = constant_model(0.7);
        let ups = vec![
            update(0, g.clone(), 5, 1.0),
            update(1, g.clone(), 9, 2.0),
        ];
        let out = aggregate_qfedavg(&g, &ups, 3.0, 10.0).unwrap();
        for (a, b) in out.flatten_trainable().iter().zip(g.flatten_trainable()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn qfedavg_matches_scalar_brute_force() {
        // Independent scalar evaluation of the update rule for two clients
        // with F = (1, 4), q = 1.
        let (q, l) = (1.0, 2.0);
        let g_val = 0.5;
        let w = [1.2, -0.3];
        let f = [1.0, 4.0];
        let g = constant_model(g_val);
        let dim = g.trainable_len() as f64;

        let ups = vec![
            update(0, constant_model(w[0]), 4, f[0]),
            update(1, constant_model(w[1]), 6, f[1]),
        ];
        let out = aggregate_qfedavg(&g, &ups, q, l).unwrap();

        let mut numer = 0.0;
        let mut denom = 0.0;
        for k in 0..2 {
            let fe = f[k] + 1e-10;
            let delta = l * (g_val - w[k]);
            // Norm over all coordinates of the constant model.
            let norm2 = dim * delta * delta;
            numer += fe.powf(q) * delta;
            denom += q * fe.powf(q - 1.0) * norm2 + l * fe.powf(q);
        }
        let expected = g_val - numer / denom;
        for &v in &out.flatten_trainable() {
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        }
    }

    #[test]
    fn fedyogi_null_round_is_a_fixed_point() {
        let g = constant_model(0.4);
        let mut state = ServerOptState::new(g.trainable_len(), 0.1);
        let ups = vec![update(0, g.clone(), 3, 0.2), update(1, g.clone(), 4, 0.3)];
        let out =
            aggregate_fedyogi(&g, &ups, &mut state, 0.1, 0.1, (0.9, 0.99)).unwrap();
        for (a, b) in out.flatten_trainable().iter().zip(g.flatten_trainable()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(state.round, 1);
        assert!(state.m.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn fedyogi_single_step_closed_form() {
        // Scalar case: w = 0, delta = 1, beta = (0.9, 0.99), tau = 0.1,
        // eta_g = 0.1: m' = 0.1, v' = 0.02, w' = 0.01 / (sqrt(0.02) + 0.1).
        let g = constant_model(0.0);
        let mut state = ServerOptState::new(g.trainable_len(), 0.1);
        let ups = vec![update(0, constant_model(1.0), 5, 0.2)];
        let out = aggregate_fedyogi(&g, &ups, &mut state, 0.1, 0.1, (0.9, 0.99)).unwrap();
        let expected = 0.1 * 0.1 / (0.02f64.sqrt() + 0.1);
        for &v in &out.flatten_trainable() {
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        }
        assert!(state.m.iter().all(|&m| (m - 0.1).abs() < 1e-15));
        assert!(state.v.iter().all(|&v| (v - 0.02).abs() < 1e-15));
    }

    #[test]
    fn fedyogi_momentum_accumulates_under_constant_deltas() {
        let g = constant_model(0.0);
        let mut state = ServerOptState::new(g.trainable_len(), 0.1);
        let ups = vec![update(0, constant_model(1.0), 5, 0.2)];
        // Keep the global fixed so the client delta stays constant.
        aggregate_fedyogi(&g, &ups, &mut state, 0.1, 0.1, (0.9, 0.99)).unwrap();
        let m1 = state.m[0].abs();
        aggregate_fedyogi(&g, &ups, &mut state, 0.1, 0.1, (0.9, 0.99)).unwrap();
        let m2 = state.m[0].abs();
        assert!(m2 > m1);
        assert_eq!(state.round, 2);
    }
}
