//! Federated orchestration: client local training (with optional proximal
//! term), the four server aggregation strategies, and the central / local /
//! federated run loops.

mod run;
mod strategy;
mod train;

pub use run::{
    run_central, run_federated, run_local, ClientRoundRecord, ClientShard, EvalSplit,
    FedRunInputs, RoundRecord, RunHistory, RunOutcome, TestMetrics,
};
pub use strategy::{
    aggregate_fedavg, aggregate_fedyogi, aggregate_qfedavg, ServerOptState, Strategy,
    StrategyConfig,
};
pub use train::{evaluate_fbeta, local_train, shard_loss};

use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::nn::{ModelParams, TrainConfig};

/// One client's round result.
#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub new_params: ModelParams,
    /// Local sample count used for aggregation weights.
    pub n_k: usize,
    /// Full-shard loss of the incoming global model, before any update.
    pub loss_at_global: f64,
    /// Full-shard loss of the updated model.
    pub local_train_loss: f64,
}

/// Settings for one orchestrated run (any mode).
#[derive(Debug, Clone)]
pub struct FedRunConfig {
    pub local_epochs: usize,
    pub global_rounds: usize,
    pub train: TrainConfig,
    /// Replace `train.class_weights` with inverse-frequency weights computed
    /// on each shard.
    pub auto_class_weights: bool,
    pub strategy: StrategyConfig,
    pub metrics: MetricsConfig,
    pub seed: u64,
}

impl FedRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be >= 1".into()));
        }
        if self.global_rounds == 0 {
            return Err(Error::Config("global_rounds must be >= 1".into()));
        }
        self.train.validate()?;
        self.strategy.validate()?;
        self.metrics.validate()
    }

    /// Class weights to use for a shard with the given labels.
    pub fn weights_for(&self, labels: &[u8]) -> [f64; 2] {
        if self.auto_class_weights {
            crate::nn::inverse_frequency_weights(labels)
        } else {
            self.train.class_weights
        }
    }
}
