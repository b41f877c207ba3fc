//! Shipped experiment presets: one per dataset family, carrying the model
//! and training settings of the benchmark's experimental grid.

use flbench_core::data::{self, ColumnSchema};
use flbench_core::error::{Error, Result};
use flbench_core::fed::Strategy;
use flbench_core::partition::Scheme;

use crate::config::{
    AutoTag, ClassWeights, DatasetSection, ExperimentConfig, FedSection, Lipschitz,
    MetricsSection, Mode, ModelSection, PartitionSection, ResampleScope, ResampleSection,
    SplitSection, TrainSection,
};

pub const PRESET_NAMES: [&str; 4] = ["ai4i2020", "scania", "harddrive", "fladi"];

/// Column schema of a preset family.
pub fn preset_schema(name: &str) -> Result<ColumnSchema> {
    match name {
        "ai4i2020" => Ok(data::ai4i2020_schema()),
        "scania" => Ok(data::scania_schema()),
        "harddrive" => Ok(data::harddrive_schema()),
        "fladi" => Ok(data::fladi_schema()),
        other => Err(Error::Config(format!(
            "unknown preset {other:?}; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Fully populated defaults for a preset family; every field can be
/// overridden by the config file.
pub fn preset_defaults(name: &str) -> Result<ExperimentConfig> {
    let (hidden, lr, batch, clients, epochs, rounds, mu, q, eta_g, tau, beta, scheme) = match name
    {
        "ai4i2020" => (
            vec![50, 20, 10],
            1e-5,
            128,
            5,
            10,
            100,
            0.1,
            5e-12,
            0.1,
            1e-5,
            30.0,
            Scheme::Iid,
        ),
        "scania" => (
            vec![200, 100, 50],
            1e-4,
            128,
            10,
            10,
            100,
            0.001,
            5e-5,
            0.01,
            1e-5,
            50.0,
            Scheme::Iid,
        ),
        "harddrive" => (
            vec![400, 200, 100, 50],
            1e-5,
            1024,
            3,
            5,
            50,
            0.1,
            1.0,
            0.001,
            0.001,
            1.0,
            Scheme::Iid,
        ),
        "fladi" => (
            vec![35, 15, 15],
            1e-4,
            75,
            4,
            20,
            500,
            0.05,
            5e-6,
            0.1,
            1e-5,
            3.0,
            Scheme::NaturalGroups,
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(ExperimentConfig {
        mode: Mode::Federated,
        seed: 0,
        dataset: DatasetSection {
            name: name.to_string(),
            path: Default::default(),
            preset: Some(name.to_string()),
            schema: None,
        },
        split: SplitSection {
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            stratified: true,
        },
        resample: ResampleSection {
            method: data::ResampleMethod::Smote,
            k_neighbors: 5,
            target_minority_ratio: 0.2,
            scope: ResampleScope::PerClient,
        },
        partition: PartitionSection {
            scheme,
            clients,
            alpha: 0.5,
        },
        model: ModelSection {
            hidden_layers: hidden,
        },
        train: TrainSection {
            learning_rate: lr,
            batch_size: batch,
            dropout_rate: 0.2,
            class_weights: ClassWeights::Auto(AutoTag::Auto),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        },
        fed: FedSection {
            strategy: Strategy::FedAvg,
            local_epochs: epochs,
            global_rounds: rounds,
            mu,
            q,
            eta_g,
            tau,
            server_beta1: 0.9,
            server_beta2: 0.99,
            lipschitz: Lipschitz::Auto(AutoTag::Auto),
        },
        metrics: MetricsSection {
            beta,
            threshold: 0.5,
        },
    })
}
