//! Bias-corrected ADAM update over the flat trainable parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("adam {name} must be in (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// First/second moment estimates; shape-congruent with the flat trainable
/// vector of the model being optimized.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let len = params.trainable_len();
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One ADAM step in place: `θ ← θ − lr·m̂ / (√v̂ + ε)`.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ModelParams,
    grads: &Gradients,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if !grads.congruent_with(params) || state.m.len() != params.trainable_len() {
        return Err(Error::Shape(
            "optimizer state, gradients and parameters must be shape-congruent".into(),
        ));
    }
    if !(lr > 0.0) {
        return Err(Error::Config("learning rate must be > 0".into()));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let mut theta = params.flatten_trainable();
    for i in 0..theta.len() {
        let g = grads.flat[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    params.assign_trainable(&theta)
}
