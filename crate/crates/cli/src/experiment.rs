//! End-to-end experiment execution: load → split → impute → standardize →
//! partition → resample → train → evaluate, with results persisted as a
//! RunHistory file plus a one-row result record.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flbench_core::data::{
    impute_median, load_csv, smote, split, standardize, Dataset, ResampleMethod,
};
use flbench_core::error::{Error, Result};
use flbench_core::fed::{
    run_central, run_federated, run_local, ClientShard, EvalSplit, FedRunInputs, RunHistory,
};
use flbench_core::partition::{partition, PartitionPlan, PartitionSpec, Scheme};
use flbench_core::rng::derive_seed;

use crate::config::{ExperimentConfig, Mode, ResampleScope};

/// One finished run, in the exact shape of the persisted result JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub scenario: String,
    pub clients: usize,
    pub method: String,
    pub fbeta: f64,
    pub fairness: f64,
    pub best_round: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// SHA-256 over the canonical JSON form of the resolved configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let value = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let canonical = serde_json::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

struct Prepared {
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

/// Shared pipeline prefix: load, split, impute, standardize, and (for global
/// scope) resample the pooled training split.
fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let schema = cfg.column_schema()?;
    if cfg.dataset.path.as_os_str().is_empty() {
        return Err(Error::Config("missing dataset: dataset.path is empty".into()));
    }
    let ds = load_csv(&cfg.dataset.path, &schema)?;
    let (mut train, mut val, mut test) = split(&ds, &cfg.split_spec(cfg.seed))?;
    impute_median(&mut train, &mut [&mut val, &mut test])?;
    standardize(&mut train, &mut [&mut val, &mut test])?;

    if cfg.resample.method == ResampleMethod::Smote && cfg.resample.scope == ResampleScope::Global
    {
        train = smote(
            &train,
            &cfg.resample_spec(derive_seed(cfg.seed, "smote-global", 0, 0)),
        )?;
    }
    Ok(Prepared { train, val, test })
}

/// Resamples one client shard in per-client scope. Shards whose minority
/// class is too small to interpolate (< 2 samples) pass through unchanged.
fn resample_shard(cfg: &ExperimentConfig, shard: &Dataset, client: usize) -> Result<Dataset> {
    if cfg.resample.method != ResampleMethod::Smote
        || cfg.resample.scope != ResampleScope::PerClient
    {
        return Ok(shard.clone());
    }
    let pos = shard.positives();
    let minority = pos.min(shard.n() - pos);
    if minority < 2 {
        return Ok(shard.clone());
    }
    smote(
        shard,
        &cfg.resample_spec(derive_seed(cfg.seed, "smote", client as u64, 0)),
    )
}

fn shards_from_plan(
    cfg: &ExperimentConfig,
    train: &Dataset,
    plan: &PartitionPlan,
) -> Result<Vec<ClientShard>> {
    plan.clients
        .iter()
        .enumerate()
        .map(|(k, idx)| {
            if idx.is_empty() {
                return Err(Error::Train(format!("client {k} received an empty shard")));
            }
            let raw = train.subset(idx);
            let boosted = resample_shard(cfg, &raw, k)?;
            Ok(ClientShard {
                train_x: boosted.features,
                train_y: boosted.labels,
                raw_x: raw.features,
                raw_y: raw.labels,
            })
        })
        .collect()
}

fn partition_spec(cfg: &ExperimentConfig) -> PartitionSpec {
    PartitionSpec {
        scheme: cfg.partition.scheme,
        num_clients: cfg.partition.clients,
        alpha: cfg.partition.alpha,
        seed: cfg.seed,
    }
}

fn build_inputs(cfg: &ExperimentConfig) -> Result<(FedRunInputs, Option<PartitionPlan>)> {
    let prepared = prepare(cfg)?;
    let input_dim = prepared.train.d();
    let mut layer_sizes = Vec::with_capacity(cfg.model.hidden_layers.len() + 2);
    layer_sizes.push(input_dim);
    layer_sizes.extend(&cfg.model.hidden_layers);
    layer_sizes.push(2);

    let (clients, plan) = match cfg.mode {
        Mode::Central => {
            let raw = prepared.train.clone();
            // The pooled shard resamples like a single client so that a
            // one-client local run is bit-identical to a central run.
            let boosted = if cfg.resample.scope == ResampleScope::PerClient {
                resample_shard(cfg, &raw, 0)?
            } else {
                raw.clone()
            };
            (
                vec![ClientShard {
                    train_x: boosted.features,
                    train_y: boosted.labels,
                    raw_x: raw.features,
                    raw_y: raw.labels,
                }],
                None,
            )
        }
        Mode::Local | Mode::Federated => {
            let plan = partition(&prepared.train, &partition_spec(cfg))?;
            let shards = shards_from_plan(cfg, &prepared.train, &plan)?;
            (shards, Some(plan))
        }
    };

    Ok((
        FedRunInputs {
            clients,
            val: EvalSplit {
                x: prepared.val.features,
                y: prepared.val.labels,
            },
            test: EvalSplit {
                x: prepared.test.features,
                y: prepared.test.labels,
            },
            layer_sizes,
        },
        plan,
    ))
}

/// File stem for a run's outputs.
pub fn run_stem(cfg: &ExperimentConfig) -> String {
    format!(
        "{}_{}_k{}_{}_seed{}",
        cfg.dataset.name,
        cfg.scenario_label(),
        cfg.partition.clients,
        cfg.method_label(),
        cfg.seed
    )
}

/// Executes a fully resolved experiment and writes `<stem>.history.json` and
/// `<stem>.result.json` under `out_dir`. Returns the result row.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(ResultRow, RunHistory)> {
    cfg.validate()?;
    let (inputs, _) = build_inputs(cfg)?;
    let fed_cfg = cfg.fed_run_config();
    let mut outcome = match cfg.mode {
        Mode::Central => run_central(&inputs, &fed_cfg)?,
        Mode::Local => run_local(&inputs, &fed_cfg)?,
        Mode::Federated => run_federated(&inputs, &fed_cfg)?,
    };
    outcome.history.config_echo =
        serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;

    let row = ResultRow {
        dataset: cfg.dataset.name.clone(),
        scenario: cfg.scenario_label().to_string(),
        clients: cfg.partition.clients,
        method: cfg.method_label().to_string(),
        fbeta: outcome.history.final_test_metrics.fbeta,
        fairness: outcome.history.final_test_metrics.fairness,
        best_round: outcome.history.best_round,
        seed: cfg.seed,
        config_hash: config_hash(cfg)?,
    };

    std::fs::create_dir_all(out_dir)?;
    let stem = run_stem(cfg);
    let history_path = out_dir.join(format!("{stem}.history.json"));
    let result_path = out_dir.join(format!("{stem}.result.json"));
    std::fs::write(
        &history_path,
        serde_json::to_string_pretty(&outcome.history).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    std::fs::write(
        &result_path,
        serde_json::to_string_pretty(&row).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok((row, outcome.history))
}

/// Plan file shape for `flbench partition`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanFile {
    pub scheme: Scheme,
    pub seed: u64,
    pub clients: Vec<Vec<usize>>,
}

/// Runs the pipeline up to partitioning and writes the plan as JSON.
pub fn write_partition_plan(cfg: &ExperimentConfig, out: &Path) -> Result<PlanFile> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let plan = partition(&prepared.train, &partition_spec(cfg))?;
    let file = PlanFile {
        scheme: plan.scheme,
        seed: plan.seed,
        clients: plan.clients,
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(
        out,
        serde_json::to_string(&file).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok(file)
}
