//! Experiment configuration: a TOML file with nested sections, validated
//! against presets. Unknown keys are rejected; preset expansion happens
//! before user overrides; the fully resolved configuration is echoed into
//! every output so a result file is sufficient to re-run the experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flbench_core::data::{ColumnKind, ColumnSchema, Provenance};
use flbench_core::error::{Error, Result};
use flbench_core::fed::Strategy;
use flbench_core::partition::Scheme;

use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Central,
    Local,
    Federated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleScope {
    Global,
    PerClient,
}

/// `"auto"` or a fixed pair of class weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassWeights {
    Auto(AutoTag),
    Fixed([f64; 2]),
}

/// `"auto"` or an explicit qFedAvg Lipschitz scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lipschitz {
    Auto(AutoTag),
    Value(f64),
}

/// The literal string "auto" in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSection {
    pub name: String,
    pub path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    pub label: String,
    pub label_true: Vec<String>,
    pub label_false: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub skip: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub column: String,
    pub values: Vec<String>,
}

impl SchemaSection {
    pub fn to_column_schema(&self) -> ColumnSchema {
        let mut label_map: Vec<(String, u8)> = Vec::new();
        for v in &self.label_false {
            label_map.push((v.clone(), 0));
        }
        for v in &self.label_true {
            label_map.push((v.clone(), 1));
        }
        let mut columns: Vec<(String, ColumnKind)> = Vec::new();
        for name in &self.skip {
            columns.push((name.clone(), ColumnKind::Skip));
        }
        for name in &self.numeric {
            columns.push((name.clone(), ColumnKind::Numeric));
        }
        for (name, values) in &self.categorical {
            columns.push((name.clone(), ColumnKind::Categorical(values.clone())));
        }
        ColumnSchema {
            label: self.label.clone(),
            label_map,
            columns,
            group: self
                .group
                .as_ref()
                .map(|g| (g.column.clone(), g.values.clone())),
            provenance: Provenance::Synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSection {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub stratified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResampleSection {
    pub method: flbench_core::data::ResampleMethod,
    pub k_neighbors: usize,
    pub target_minority_ratio: f64,
    pub scope: ResampleScope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSection {
    pub scheme: Scheme,
    pub clients: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    pub hidden_layers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub class_weights: ClassWeights,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FedSection {
    pub strategy: Strategy,
    pub local_epochs: usize,
    pub global_rounds: usize,
    pub mu: f64,
    pub q: f64,
    pub eta_g: f64,
    pub tau: f64,
    pub server_beta1: f64,
    pub server_beta2: f64,
    pub lipschitz: Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSection {
    pub beta: f64,
    pub threshold: f64,
}

/// Fully resolved experiment description (preset defaults plus overrides).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub dataset: DatasetSection,
    pub split: SplitSection,
    pub resample: ResampleSection,
    pub partition: PartitionSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub fed: FedSection,
    pub metrics: MetricsSection,
}

impl ExperimentConfig {
    /// Column schema resolved from the preset family or the inline section.
    pub fn column_schema(&self) -> Result<ColumnSchema> {
        if let Some(schema) = &self.dataset.schema {
            return Ok(schema.to_column_schema());
        }
        let preset = self
            .dataset
            .preset
            .as_deref()
            .ok_or_else(|| Error::Config("missing dataset: set dataset.preset or dataset.schema".into()))?;
        presets::preset_schema(preset)
    }

    /// The qFedAvg scale, with "auto" resolved to 1 / learning_rate.
    pub fn lipschitz_value(&self) -> f64 {
        match self.fed.lipschitz {
            Lipschitz::Auto(_) => 1.0 / self.train.learning_rate,
            Lipschitz::Value(v) => v,
        }
    }

    /// Training-method label for result rows.
    pub fn method_label(&self) -> &'static str {
        match self.mode {
            Mode::Central => "central",
            Mode::Local => "local",
            Mode::Federated => match self.fed.strategy {
                Strategy::FedAvg => "fedavg",
                Strategy::FedProx => "fedprox",
                Strategy::QFedAvg => "qfedavg",
                Strategy::FedYogi => "fedyogi",
            },
        }
    }

    /// Distribution-scenario label for result rows.
    pub fn scenario_label(&self) -> &'static str {
        match self.partition.scheme {
            Scheme::Iid => "iid",
            Scheme::FeatureSkewPca => "feature_skew",
            Scheme::QuantitySkewDirichlet => "quantity_skew",
            Scheme::NaturalGroups => "natural_groups",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.hidden_layers.is_empty() {
            return Err(Error::Config("model.hidden_layers must not be empty".into()));
        }
        if self.model.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        self.split_spec(0).validate()?;
        self.resample_spec(0).validate()?;
        flbench_core::partition::PartitionSpec {
            scheme: self.partition.scheme,
            num_clients: self.partition.clients,
            alpha: self.partition.alpha,
            seed: 0,
        }
        .validate()?;
        self.train_config([1.0, 1.0]).validate()?;
        self.fed_run_config().validate()?;
        Ok(())
    }

    pub fn split_spec(&self, seed: u64) -> flbench_core::data::SplitSpec {
        flbench_core::data::SplitSpec {
            train_frac: self.split.train_frac,
            val_frac: self.split.val_frac,
            test_frac: self.split.test_frac,
            stratified: self.split.stratified,
            seed,
        }
    }

    pub fn resample_spec(&self, seed: u64) -> flbench_core::data::ResampleSpec {
        flbench_core::data::ResampleSpec {
            method: self.resample.method,
            k_neighbors: self.resample.k_neighbors,
            target_minority_ratio: self.resample.target_minority_ratio,
            seed,
        }
    }

    pub fn train_config(&self, class_weights: [f64; 2]) -> flbench_core::nn::TrainConfig {
        flbench_core::nn::TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            dropout_rate: self.train.dropout_rate,
            class_weights,
            adam: flbench_core::nn::AdamConfig {
                beta1: self.train.adam_beta1,
                beta2: self.train.adam_beta2,
                epsilon: self.train.adam_epsilon,
            },
        }
    }

    pub fn fed_run_config(&self) -> flbench_core::fed::FedRunConfig {
        let (auto, weights) = match self.train.class_weights {
            ClassWeights::Auto(_) => (true, [1.0, 1.0]),
            ClassWeights::Fixed(w) => (false, w),
        };
        flbench_core::fed::FedRunConfig {
            local_epochs: self.fed.local_epochs,
            global_rounds: self.fed.global_rounds,
            train: self.train_config(weights),
            auto_class_weights: auto,
            strategy: flbench_core::fed::StrategyConfig {
                strategy: self.fed.strategy,
                mu: self.fed.mu,
                q: self.fed.q,
                lipschitz: self.lipschitz_value(),
                eta_g: self.fed.eta_g,
                tau: self.fed.tau,
                server_beta1: self.fed.server_beta1,
                server_beta2: self.fed.server_beta2,
            },
            metrics: flbench_core::metrics::MetricsConfig {
                beta: self.metrics.beta,
                threshold: self.metrics.threshold,
            },
            seed: self.seed,
        }
    }
}

// ---- raw (partial) form -------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    seed: Option<u64>,
    dataset: Option<RawDataset>,
    split: Option<RawSplit>,
    resample: Option<RawResample>,
    partition: Option<RawPartition>,
    model: Option<RawModel>,
    train: Option<RawTrain>,
    fed: Option<RawFed>,
    metrics: Option<RawMetrics>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    preset: Option<String>,
    path: Option<PathBuf>,
    name: Option<String>,
    schema: Option<SchemaSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    train_frac: Option<f64>,
    val_frac: Option<f64>,
    test_frac: Option<f64>,
    stratified: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResample {
    method: Option<flbench_core::data::ResampleMethod>,
    k_neighbors: Option<usize>,
    target_minority_ratio: Option<f64>,
    scope: Option<ResampleScope>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    scheme: Option<Scheme>,
    clients: Option<usize>,
    alpha: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    hidden_layers: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    dropout_rate: Option<f64>,
    class_weights: Option<ClassWeights>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    adam_epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFed {
    strategy: Option<Strategy>,
    local_epochs: Option<usize>,
    global_rounds: Option<usize>,
    mu: Option<f64>,
    q: Option<f64>,
    eta_g: Option<f64>,
    tau: Option<f64>,
    server_beta1: Option<f64>,
    server_beta2: Option<f64>,
    lipschitz: Option<Lipschitz>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    beta: Option<f64>,
    threshold: Option<f64>,
}

/// Parses and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses and resolves configuration text: preset expansion first, explicit
/// keys override, then cross-field validation.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;

    let dataset = raw.dataset.unwrap_or_default();
    let preset_name = dataset.preset.clone();
    let mut missing: Vec<&str> = Vec::new();

    let base = match preset_name.as_deref() {
        Some(name) => Some(presets::preset_defaults(name)?),
        None => None,
    };

    if dataset.path.is_none() {
        missing.push("dataset.path");
    }
    if preset_name.is_none() && dataset.schema.is_none() {
        missing.push("dataset.preset or dataset.schema");
    }

    // Helper: take the explicit value, else the preset default, else record
    // the key as missing.
    macro_rules! resolve {
        ($explicit:expr, $default:expr, $key:literal) => {
            match ($explicit, $default) {
                (Some(v), _) => v,
                (None, Some(v)) => v,
                (None, None) => {
                    missing.push($key);
                    Default::default()
                }
            }
        };
    }

    let b = base.as_ref();
    let split_raw = raw.split.unwrap_or_default();
    let resample_raw = raw.resample.unwrap_or_default();
    let partition_raw = raw.partition.unwrap_or_default();
    let model_raw = raw.model.unwrap_or_default();
    let train_raw = raw.train.unwrap_or_default();
    let fed_raw = raw.fed.unwrap_or_default();
    let metrics_raw = raw.metrics.unwrap_or_default();

    let config = ExperimentConfig {
        mode: raw.mode.or(b.map(|c| c.mode)).unwrap_or(Mode::Federated),
        seed: raw.seed.unwrap_or(0),
        dataset: DatasetSection {
            name: dataset
                .name
                .or_else(|| preset_name.clone())
                .or_else(|| {
                    dataset
                        .path
                        .as_ref()
                        .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
                })
                .unwrap_or_else(|| "dataset".into()),
            path: dataset.path.unwrap_or_default(),
            preset: preset_name,
            schema: dataset.schema,
        },
        split: SplitSection {
            train_frac: split_raw
                .train_frac
                .or(b.map(|c| c.split.train_frac))
                .unwrap_or(0.8),
            val_frac: split_raw.val_frac.or(b.map(|c| c.split.val_frac)).unwrap_or(0.1),
            test_frac: split_raw
                .test_frac
                .or(b.map(|c| c.split.test_frac))
                .unwrap_or(0.1),
            stratified: split_raw
                .stratified
                .or(b.map(|c| c.split.stratified))
                .unwrap_or(true),
        },
        resample: ResampleSection {
            method: resample_raw
                .method
                .or(b.map(|c| c.resample.method))
                .unwrap_or(flbench_core::data::ResampleMethod::Smote),
            k_neighbors: resample_raw
                .k_neighbors
                .or(b.map(|c| c.resample.k_neighbors))
                .unwrap_or(5),
            target_minority_ratio: resample_raw
                .target_minority_ratio
                .or(b.map(|c| c.resample.target_minority_ratio))
                .unwrap_or(0.2),
            scope: resample_raw
                .scope
                .or(b.map(|c| c.resample.scope))
                .unwrap_or(ResampleScope::PerClient),
        },
        partition: PartitionSection {
            scheme: partition_raw
                .scheme
                .or(b.map(|c| c.partition.scheme))
                .unwrap_or(Scheme::Iid),
            clients: resolve!(partition_raw.clients, b.map(|c| c.partition.clients), "partition.clients"),
            alpha: partition_raw
                .alpha
                .or(b.map(|c| c.partition.alpha))
                .unwrap_or(0.5),
        },
        model: ModelSection {
            hidden_layers: resolve!(
                model_raw.hidden_layers,
                b.map(|c| c.model.hidden_layers.clone()),
                "model.hidden_layers"
            ),
        },
        train: TrainSection {
            learning_rate: resolve!(train_raw.learning_rate, b.map(|c| c.train.learning_rate), "train.learning_rate"),
            batch_size: resolve!(train_raw.batch_size, b.map(|c| c.train.batch_size), "train.batch_size"),
            dropout_rate: train_raw
                .dropout_rate
                .or(b.map(|c| c.train.dropout_rate))
                .unwrap_or(0.2),
            class_weights: train_raw
                .class_weights
                .or(b.map(|c| c.train.class_weights))
                .unwrap_or(ClassWeights::Auto(AutoTag::Auto)),
            adam_beta1: train_raw.adam_beta1.or(b.map(|c| c.train.adam_beta1)).unwrap_or(0.9),
            adam_beta2: train_raw.adam_beta2.or(b.map(|c| c.train.adam_beta2)).unwrap_or(0.999),
            adam_epsilon: train_raw
                .adam_epsilon
                .or(b.map(|c| c.train.adam_epsilon))
                .unwrap_or(1e-8),
        },
        fed: FedSection {
            strategy: fed_raw
                .strategy
                .or(b.map(|c| c.fed.strategy))
                .unwrap_or(Strategy::FedAvg),
            local_epochs: resolve!(fed_raw.local_epochs, b.map(|c| c.fed.local_epochs), "fed.local_epochs"),
            global_rounds: resolve!(fed_raw.global_rounds, b.map(|c| c.fed.global_rounds), "fed.global_rounds"),
            mu: fed_raw.mu.or(b.map(|c| c.fed.mu)).unwrap_or(0.0),
            q: fed_raw.q.or(b.map(|c| c.fed.q)).unwrap_or(0.0),
            eta_g: fed_raw.eta_g.or(b.map(|c| c.fed.eta_g)).unwrap_or(0.1),
            tau: fed_raw.tau.or(b.map(|c| c.fed.tau)).unwrap_or(1e-5),
            server_beta1: fed_raw
                .server_beta1
                .or(b.map(|c| c.fed.server_beta1))
                .unwrap_or(0.9),
            server_beta2: fed_raw
                .server_beta2
                .or(b.map(|c| c.fed.server_beta2))
                .unwrap_or(0.99),
            lipschitz: fed_raw
                .lipschitz
                .or(b.map(|c| c.fed.lipschitz))
                .unwrap_or(Lipschitz::Auto(AutoTag::Auto)),
        },
        metrics: MetricsSection {
            beta: resolve!(metrics_raw.beta, b.map(|c| c.metrics.beta), "metrics.beta"),
            threshold: metrics_raw
                .threshold
                .or(b.map(|c| c.metrics.threshold))
                .unwrap_or(0.5),
        },
    };

    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ai4i_preset_expands_to_table_values() {
        let cfg = parse_config_str(
            "[dataset]\npreset = \"ai4i2020\"\npath = \"data/ai4i2020.csv\"\n",
        )
        .unwrap();
        assert_eq!(cfg.train.learning_rate, 1e-5);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.model.hidden_layers, vec![50, 20, 10]);
        assert_eq!(cfg.fed.local_epochs, 10);
        assert_eq!(cfg.fed.global_rounds, 100);
        assert_eq!(cfg.metrics.beta, 30.0);
        assert_eq!(cfg.partition.clients, 5);
        assert_eq!(cfg.fed.mu, 0.1);
        assert_eq!(cfg.fed.q, 5e-12);
        assert_eq!(cfg.fed.eta_g, 0.1);
        assert_eq!(cfg.fed.tau, 1e-5);
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let err = parse_config_str("").unwrap_err().to_string();
        assert!(err.contains("missing required keys"), "{err}");
        assert!(err.contains("dataset.path"), "{err}");
        assert!(err.contains("model.hidden_layers"), "{err}");
        assert!(err.contains("metrics.beta"), "{err}");
    }

    #[test]
    fn overrides_take_precedence_over_preset() {
        let cfg = parse_config_str(
            "[dataset]\npreset = \"fladi\"\npath = \"x.csv\"\n\n[fed]\nmu = 0.2\n",
        )
        .unwrap();
        // Preset default is 0.05; the override must win and be echoed.
        assert_eq!(cfg.fed.mu, 0.2);
        let echo = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echo["fed"]["mu"], serde_json::json!(0.2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config_str("[dataset]\npreset = \"ai4i2020\"\npath = \"x\"\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("config parse error"), "{err}");
        assert!(parse_config_str("typo_section = 3\n").is_err());
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(parse_config_str("[dataset]\npreset = \"nope\"\npath = \"x\"\n").is_err());
    }

    #[test]
    fn auto_and_fixed_class_weights_parse() {
        let auto = parse_config_str(
            "[dataset]\npreset = \"ai4i2020\"\npath = \"x\"\n[train]\nclass_weights = \"auto\"\n",
        )
        .unwrap();
        assert_eq!(auto.train.class_weights, ClassWeights::Auto(AutoTag::Auto));
        let fixed = parse_config_str(
            "[dataset]\npreset = \"ai4i2020\"\npath = \"x\"\n[train]\nclass_weights = [1.0, 7.5]\n",
        )
        .unwrap();
        assert_eq!(fixed.train.class_weights, ClassWeights::Fixed([1.0, 7.5]));
    }

    #[test]
    fn lipschitz_auto_resolves_to_inverse_learning_rate() {
        let cfg = parse_config_str("[dataset]\npreset = \"ai4i2020\"\npath = \"x\"\n").unwrap();
        assert!((cfg.lipschitz_value() - 1e5).abs() < 1e-6);
        let explicit = parse_config_str(
            "[dataset]\npreset = \"ai4i2020\"\npath = \"x\"\n[fed]\nlipschitz = 10.0\n",
        )
        .unwrap();
        assert_eq!(explicit.lipschitz_value(), 10.0);
    }

    #[test]
    fn inline_schema_builds_column_schema() {
        let cfg = parse_config_str(
            r#"
mode = "central"
seed = 3
[dataset]
path = "data.csv"
name = "custom"
[dataset.schema]
label = "y"
label_true = ["1"]
label_false = ["0"]
numeric = ["a", "b"]
skip = ["id"]
[model]
hidden_layers = [4]
[train]
learning_rate = 0.001
batch_size = 16
[fed]
local_epochs = 1
global_rounds = 2
[partition]
clients = 1
[metrics]
beta = 1.0
"#,
        )
        .unwrap();
        let schema = cfg.column_schema().unwrap();
        assert_eq!(schema.label, "y");
        assert_eq!(schema.feature_names(), vec!["a", "b"]);
        assert_eq!(cfg.dataset.name, "custom");
    }
}
