//! Run loops for the three training modes.
//!
//! Within a round, clients train independently and may execute in parallel;
//! each derives its own RNG stream from `(seed, client, round)`, so the
//! result is a pure function of the configuration no matter how many worker
//! threads are in play. Aggregation is the synchronization barrier.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fed::strategy::{
    aggregate_fedavg, aggregate_fedyogi, aggregate_qfedavg, ServerOptState, Strategy,
};
use crate::fed::train::{evaluate_fbeta, local_train, shard_loss, train_epochs};
use crate::fed::{ClientUpdate, FedRunConfig};
use crate::metrics::{confusion, f_beta, fairness_entropy, ConfusionMatrix};
use crate::nn::{forward_eval, mlp_init, positive_probs, AdamState, ModelParams, TrainConfig};
use crate::rng::{derive_seed, RngStream};

/// Features and labels of a held-out split.
#[derive(Debug, Clone)]
pub struct EvalSplit {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

/// One client's training material: the shard it trains on (after any
/// resampling) and the raw shard used for per-client evaluation.
#[derive(Debug, Clone)]
pub struct ClientShard {
    pub train_x: Array2<f64>,
    pub train_y: Vec<u8>,
    pub raw_x: Array2<f64>,
    pub raw_y: Vec<u8>,
}

/// Everything a run loop needs besides its configuration.
#[derive(Debug, Clone)]
pub struct FedRunInputs {
    pub clients: Vec<ClientShard>,
    pub val: EvalSplit,
    pub test: EvalSplit,
    /// Input dim, hidden dims, output dim.
    pub layer_sizes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientRoundRecord {
    pub client_id: usize,
    /// Federated: full-shard loss of the incoming global model. Solo modes:
    /// full-shard loss at the checkpoint.
    pub f_k: f64,
    pub n_k: usize,
    /// F-beta of this client's updated model on the shared validation split.
    pub val_fbeta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub per_client: Vec<ClientRoundRecord>,
    pub global_val_fbeta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestMetrics {
    pub fbeta: f64,
    pub fairness: f64,
    pub confusion: Option<ConfusionMatrix>,
    pub per_client_fbeta: Vec<f64>,
}

/// Serialized record of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunHistory {
    pub config_echo: serde_json::Value,
    pub rounds: Vec<RoundRecord>,
    pub best_round: usize,
    pub final_test_metrics: TestMetrics,
}

/// A run's serializable record plus the model(s) it selected: the best
/// global checkpoint for federated/central runs, one model per client for
/// local runs.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub history: RunHistory,
    pub models: Vec<ModelParams>,
}

fn check_inputs(inputs: &FedRunInputs, cfg: &FedRunConfig) -> Result<()> {
    cfg.validate()?;
    if inputs.clients.is_empty() {
        return Err(Error::Config("no client shards".into()));
    }
    for (k, c) in inputs.clients.iter().enumerate() {
        if c.train_x.nrows() == 0 || c.raw_x.nrows() == 0 {
            return Err(Error::Train(format!("client {k} has an empty shard")));
        }
    }
    if inputs.val.x.nrows() == 0 || inputs.test.x.nrows() == 0 {
        return Err(Error::Data("validation and test splits must be non-empty".into()));
    }
    Ok(())
}

fn client_train_config(cfg: &FedRunConfig, labels: &[u8]) -> TrainConfig {
    TrainConfig {
        class_weights: cfg.weights_for(labels),
        ..cfg.train.clone()
    }
}

/// Per-client F-beta of one model over the clients' raw shards, feeding the
/// fairness entropy.
fn per_client_fbeta(
    params: &ModelParams,
    inputs: &FedRunInputs,
    cfg: &FedRunConfig,
) -> Result<Vec<f64>> {
    inputs
        .clients
        .par_iter()
        .map(|c| evaluate_fbeta(params, c.raw_x.view(), &c.raw_y, &cfg.metrics))
        .collect()
}

fn test_metrics_of(
    params: &ModelParams,
    inputs: &FedRunInputs,
    cfg: &FedRunConfig,
) -> Result<TestMetrics> {
    let logits = forward_eval(params, inputs.test.x.view())?;
    let probs = positive_probs(logits.view());
    let cm = confusion(&probs, &inputs.test.y, cfg.metrics.threshold)?;
    let fbeta = f_beta(&cm, cfg.metrics.beta);
    let per_client = per_client_fbeta(params, inputs, cfg)?;
    let fairness = fairness_entropy(&per_client)?;
    Ok(TestMetrics {
        fbeta,
        fairness,
        confusion: Some(cm),
        per_client_fbeta: per_client,
    })
}

/// Federated training: R rounds of K-client local training plus server
/// aggregation. The reported model is the round checkpoint with the best
/// validation F-beta (earliest round wins ties).
pub fn run_federated(inputs: &FedRunInputs, cfg: &FedRunConfig) -> Result<RunOutcome> {
    check_inputs(inputs, cfg)?;
    let mut global = mlp_init(
        &inputs.layer_sizes,
        derive_seed(cfg.seed, "model-init", 0, 0),
    )?;
    let strategy = cfg.strategy.strategy;
    let mut server_state = ServerOptState::new(global.trainable_len(), cfg.strategy.tau);
    let mut rounds = Vec::with_capacity(cfg.global_rounds);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for round in 0..cfg.global_rounds {
        let results: Vec<(ClientUpdate, f64)> = inputs
            .clients
            .par_iter()
            .enumerate()
            .map(|(k, shard)| {
                let tc = client_train_config(cfg, &shard.train_y);
                let prox = if strategy == Strategy::FedProx {
                    cfg.strategy.mu
                } else {
                    0.0
                };
                let mut stream =
                    RngStream::derived(cfg.seed, "client-train", k as u64, round as u64);
                let update = local_train(
                    k,
                    shard.train_x.view(),
                    &shard.train_y,
                    &global,
                    &tc,
                    cfg.local_epochs,
                    prox,
                    &mut stream,
                )?;
                let val_fbeta = evaluate_fbeta(
                    &update.new_params,
                    inputs.val.x.view(),
                    &inputs.val.y,
                    &cfg.metrics,
                )?;
                Ok((update, val_fbeta))
            })
            .collect::<Result<_>>()?;

        let updates: Vec<ClientUpdate> = results.iter().map(|(u, _)| u.clone()).collect();
        global = match strategy {
            Strategy::FedAvg | Strategy::FedProx => aggregate_fedavg(&updates)?,
            Strategy::QFedAvg => {
                aggregate_qfedavg(&global, &updates, cfg.strategy.q, cfg.strategy.lipschitz)?
            }
            Strategy::FedYogi => aggregate_fedyogi(
                &global,
                &updates,
                &mut server_state,
                cfg.strategy.eta_g,
                cfg.strategy.tau,
                (cfg.strategy.server_beta1, cfg.strategy.server_beta2),
            )?,
        };

        let global_val_fbeta =
            evaluate_fbeta(&global, inputs.val.x.view(), &inputs.val.y, &cfg.metrics)?;
        if best.as_ref().is_none_or(|(b, _, _)| global_val_fbeta > *b) {
            best = Some((global_val_fbeta, round, global.clone()));
        }
        rounds.push(RoundRecord {
            round,
            per_client: results
                .iter()
                .map(|(u, vf)| ClientRoundRecord {
                    client_id: u.client_id,
                    f_k: u.loss_at_global,
                    n_k: u.n_k,
                    val_fbeta: *vf,
                })
                .collect(),
            global_val_fbeta,
        });
    }

    let (_, best_round, best_params) = best.expect("at least one round ran");
    let history = RunHistory {
        config_echo: serde_json::Value::Null,
        rounds,
        best_round,
        final_test_metrics: test_metrics_of(&best_params, inputs, cfg)?,
    };
    Ok(RunOutcome {
        history,
        models: vec![best_params],
    })
}

struct SoloOutcome {
    checkpoints: Vec<(f64, f64)>, // (shard loss, val fbeta) per round
    best_round: usize,
    best_params: ModelParams,
    n: usize,
}

/// Continuous training on one shard for E·R epochs with a persistent
/// optimizer, checkpointed every E epochs.
fn train_solo(
    client_id: usize,
    x: &Array2<f64>,
    y: &[u8],
    inputs: &FedRunInputs,
    cfg: &FedRunConfig,
) -> Result<SoloOutcome> {
    if x.nrows() == 0 {
        return Err(Error::Train(format!("client {client_id} has an empty shard")));
    }
    let tc = client_train_config(cfg, y);
    let mut params = mlp_init(
        &inputs.layer_sizes,
        derive_seed(cfg.seed, "model-init", 0, 0),
    )?;
    let mut adam = AdamState::new(&params);
    let mut stream = RngStream::derived(cfg.seed, "solo-train", client_id as u64, 0);
    let anchor: Vec<f64> = Vec::new();

    let mut checkpoints = Vec::with_capacity(cfg.global_rounds);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    for round in 0..cfg.global_rounds {
        train_epochs(
            &mut params,
            &mut adam,
            x.view(),
            y,
            &tc,
            cfg.local_epochs,
            0.0,
            &anchor,
            &mut stream,
        )?;
        let loss = shard_loss(&params, x.view(), y, tc.class_weights)?;
        let val_fbeta = evaluate_fbeta(&params, inputs.val.x.view(), &inputs.val.y, &cfg.metrics)?;
        if best.as_ref().is_none_or(|(b, _, _)| val_fbeta > *b) {
            best = Some((val_fbeta, round, params.clone()));
        }
        checkpoints.push((loss, val_fbeta));
    }
    let (_, best_round, best_params) = best.expect("at least one round ran");
    Ok(SoloOutcome {
        checkpoints,
        best_round,
        best_params,
        n: x.nrows(),
    })
}

/// Central baseline: one model trained on the pooled training split for
/// E·R epochs. Expects exactly one (pooled) client shard.
pub fn run_central(inputs: &FedRunInputs, cfg: &FedRunConfig) -> Result<RunOutcome> {
    check_inputs(inputs, cfg)?;
    if inputs.clients.len() != 1 {
        return Err(Error::Config(
            "central mode expects a single pooled shard".into(),
        ));
    }
    let shard = &inputs.clients[0];
    let solo = train_solo(0, &shard.train_x, &shard.train_y, inputs, cfg)?;
    let rounds = solo
        .checkpoints
        .iter()
        .enumerate()
        .map(|(round, &(loss, val_fbeta))| RoundRecord {
            round,
            per_client: vec![ClientRoundRecord {
                client_id: 0,
                f_k: loss,
                n_k: solo.n,
                val_fbeta,
            }],
            global_val_fbeta: val_fbeta,
        })
        .collect();
    let history = RunHistory {
        config_echo: serde_json::Value::Null,
        rounds,
        best_round: solo.best_round,
        final_test_metrics: test_metrics_of(&solo.best_params, inputs, cfg)?,
    };
    Ok(RunOutcome {
        history,
        models: vec![solo.best_params],
    })
}

/// Local baseline: every client trains in isolation for E·R epochs. The
/// reported F-beta is the mean of the per-client test scores; fairness is the
/// entropy of those scores.
pub fn run_local(inputs: &FedRunInputs, cfg: &FedRunConfig) -> Result<RunOutcome> {
    check_inputs(inputs, cfg)?;
    let solos: Vec<SoloOutcome> = inputs
        .clients
        .par_iter()
        .enumerate()
        .map(|(k, shard)| train_solo(k, &shard.train_x, &shard.train_y, inputs, cfg))
        .collect::<Result<_>>()?;

    let mut rounds = Vec::with_capacity(cfg.global_rounds);
    for round in 0..cfg.global_rounds {
        let per_client: Vec<ClientRoundRecord> = solos
            .iter()
            .enumerate()
            .map(|(k, s)| ClientRoundRecord {
                client_id: k,
                f_k: s.checkpoints[round].0,
                n_k: s.n,
                val_fbeta: s.checkpoints[round].1,
            })
            .collect();
        let mean_val =
            per_client.iter().map(|c| c.val_fbeta).sum::<f64>() / per_client.len() as f64;
        rounds.push(RoundRecord {
            round,
            per_client,
            global_val_fbeta: mean_val,
        });
    }

    // Reported round: where the mean validation curve peaks (selection is
    // still per client).
    let best_round = rounds
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.global_val_fbeta
                .partial_cmp(&b.1.global_val_fbeta)
                .unwrap()
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i)
        .unwrap_or(0);

    let per_client_test: Vec<f64> = solos
        .par_iter()
        .map(|s| {
            evaluate_fbeta(
                &s.best_params,
                inputs.test.x.view(),
                &inputs.test.y,
                &cfg.metrics,
            )
        })
        .collect::<Result<_>>()?;
    let mean_test = per_client_test.iter().sum::<f64>() / per_client_test.len() as f64;
    let fairness = fairness_entropy(&per_client_test)?;

    let history = RunHistory {
        config_echo: serde_json::Value::Null,
        rounds,
        best_round,
        final_test_metrics: TestMetrics {
            fbeta: mean_test,
            fairness,
            confusion: None,
            per_client_fbeta: per_client_test,
        },
    };
    Ok(RunOutcome {
        history,
        models: solos.into_iter().map(|s| s.best_params).collect(),
    })
}
