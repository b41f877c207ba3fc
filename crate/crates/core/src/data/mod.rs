//! Dataset ingestion, cleaning, standardization, stratified splitting, and
//! SMOTE oversampling for the four dataset families plus generic synthetic
//! data.

mod preprocess;
mod schema;
mod smote;
mod synth;

pub use preprocess::{impute_median, split, standardize, ScalerStats};
pub use schema::{
    ai4i2020_schema, fladi_schema, harddrive_schema, load_csv, load_csv_reader, scania_schema,
    synthetic_schema, ColumnKind, ColumnSchema,
};
pub use smote::smote;
pub use synth::{
    fixture_csv, schema_for, synth_fixture, AI4I_FIXTURE_SEED, FLADI_GROUP_WEIGHTS,
    SCANIA_FIXTURE_SEED,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which dataset family a [`Dataset`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ai4i2020,
    Scania,
    HardDrive,
    FladiLike,
    Synthetic,
}

/// Feature matrix plus binary labels for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N×D feature matrix; cells flagged in `missing` hold 0 until imputed.
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub missing: Array2<bool>,
    pub provenance: Provenance,
    /// Natural client group per sample, when the family defines one.
    pub groups: Option<Vec<u32>>,
    pub group_names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() != self.labels.len()
            || self.missing.dim() != self.features.dim()
            || self.feature_names.len() != self.d()
        {
            return Err(Error::Shape("dataset fields disagree on n or d".into()));
        }
        if self.labels.iter().any(|&y| y > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if let Some(groups) = &self.groups {
            if groups.len() != self.n() {
                return Err(Error::Shape("one group per sample required".into()));
            }
        }
        Ok(())
    }

    /// Copies the given rows into a new dataset (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.d();
        let mut features = Array2::zeros((indices.len(), d));
        let mut missing = Array2::from_elem((indices.len(), d), false);
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            features.row_mut(row).assign(&self.features.row(i));
            missing.row_mut(row).assign(&self.missing.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            feature_names: self.feature_names.clone(),
            missing,
            provenance: self.provenance,
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i]).collect()),
            group_names: self.group_names.clone(),
        }
    }
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1)")));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    None,
    Smote,
}

/// Minority-resampling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub method: ResampleMethod,
    pub k_neighbors: usize,
    /// Oversample until the minority count reaches this fraction of the
    /// majority count.
    pub target_minority_ratio: f64,
    pub seed: u64,
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if !(self.target_minority_ratio > 0.0 && self.target_minority_ratio <= 1.0) {
            return Err(Error::Config(
                "target_minority_ratio must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}
