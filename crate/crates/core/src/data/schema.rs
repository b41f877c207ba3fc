//! CSV ingestion against declared column schemas.
//!
//! Input files are UTF-8, comma-separated, with a required header row. Blank
//! cells are recorded as missing. Each dataset family ships a schema naming
//! its label column, feature columns with their encodings, and the columns to
//! ignore.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use crate::data::{Dataset, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    /// One-hot encoded over the declared values; an undeclared value in the
    /// data is an error.
    Categorical(Vec<String>),
    /// Encoded as the index of the value in the declared list.
    Ordinal(Vec<String>),
    /// Present in the file but not used as a feature.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub label: String,
    /// Raw label value → 0/1.
    pub label_map: Vec<(String, u8)>,
    /// Feature and skip columns, in feature order.
    pub columns: Vec<(String, ColumnKind)>,
    /// Natural-group column and its declared values, if the family has one.
    pub group: Option<(String, Vec<String>)>,
    pub provenance: Provenance,
}

impl ColumnSchema {
    fn map_label(&self, raw: &str) -> Result<u8> {
        let trimmed = raw.trim();
        self.label_map
            .iter()
            .find(|(v, _)| v == trimmed)
            .map(|&(_, y)| y)
            .ok_or_else(|| {
                Error::Data(format!(
                    "label value {trimmed:?} is outside {{0, 1}} after schema mapping"
                ))
            })
    }

    /// Names of the encoded feature columns, in order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (name, kind) in &self.columns {
            match kind {
                ColumnKind::Numeric | ColumnKind::Ordinal(_) => names.push(name.clone()),
                ColumnKind::Categorical(values) => {
                    names.extend(values.iter().map(|v| format!("{name}={v}")));
                }
                ColumnKind::Skip => {}
            }
        }
        names
    }
}

/// Loads a CSV file against a schema. See [`load_csv_reader`].
pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    load_csv_reader(file, schema)
}

/// Loads CSV content from any reader against a schema.
pub fn load_csv_reader<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    // Every header must be accounted for, and every schema column present.
    let mut label_idx = None;
    let mut group_idx = None;
    let mut column_idx: Vec<Option<usize>> = vec![None; schema.columns.len()];
    for (i, h) in headers.iter().enumerate() {
        if h == &schema.label {
            label_idx = Some(i);
            continue;
        }
        if let Some((gname, _)) = &schema.group {
            if h == gname {
                group_idx = Some(i);
                continue;
            }
        }
        match schema.columns.iter().position(|(name, _)| name == h) {
            Some(c) => column_idx[c] = Some(i),
            None => return Err(Error::Data(format!("unknown column {h:?} in header"))),
        }
    }
    let label_idx =
        label_idx.ok_or_else(|| Error::Data(format!("label column {:?} missing", schema.label)))?;
    for (c, idx) in column_idx.iter().enumerate() {
        if idx.is_none() {
            return Err(Error::Data(format!(
                "schema column {:?} missing from header",
                schema.columns[c].0
            )));
        }
    }
    if let Some((gname, _)) = &schema.group {
        if group_idx.is_none() {
            return Err(Error::Data(format!("group column {gname:?} missing")));
        }
    }

    let feature_names = schema.feature_names();
    let d = feature_names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut groups: Vec<u32> = Vec::new();

    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {}: expected {} fields, found {}",
                line + 2,
                headers.len(),
                record.len()
            )));
        }
        labels.push(schema.map_label(&record[label_idx])?);
        if let Some((_, declared)) = &schema.group {
            let raw = record[group_idx.unwrap()].trim();
            let gid = declared.iter().position(|v| v == raw).ok_or_else(|| {
                Error::Data(format!("row {}: unknown group value {raw:?}", line + 2))
            })?;
            groups.push(gid as u32);
        }
        for (c, (name, kind)) in schema.columns.iter().enumerate() {
            let raw = record[column_idx[c].unwrap()].trim();
            match kind {
                ColumnKind::Skip => {}
                ColumnKind::Numeric => {
                    if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                        values.push(0.0);
                        mask.push(true);
                    } else {
                        let v: f64 = raw.parse().map_err(|_| {
                            Error::Data(format!(
                                "row {}: column {name:?}: cannot parse {raw:?} as a number",
                                line + 2
                            ))
                        })?;
                        values.push(v);
                        mask.push(false);
                    }
                }
                ColumnKind::Categorical(declared) => {
                    if raw.is_empty() {
                        values.extend(std::iter::repeat_n(0.0, declared.len()));
                        mask.extend(std::iter::repeat_n(true, declared.len()));
                    } else {
                        let pos = declared.iter().position(|v| v == raw).ok_or_else(|| {
                            Error::Data(format!(
                                "row {}: column {name:?}: undeclared category {raw:?}",
                                line + 2
                            ))
                        })?;
                        for k in 0..declared.len() {
                            values.push(f64::from(k == pos));
                            mask.push(false);
                        }
                    }
                }
                ColumnKind::Ordinal(declared) => {
                    if raw.is_empty() {
                        values.push(0.0);
                        mask.push(true);
                    } else {
                        let pos = declared.iter().position(|v| v == raw).ok_or_else(|| {
                            Error::Data(format!(
                                "row {}: column {name:?}: undeclared value {raw:?}",
                                line + 2
                            ))
                        })?;
                        values.push(pos as f64);
                        mask.push(false);
                    }
                }
            }
        }
    }

    let n = labels.len();
    let dataset = Dataset {
        features: Array2::from_shape_vec((n, d), values)
            .map_err(|e| Error::Shape(e.to_string()))?,
        labels,
        feature_names,
        missing: Array2::from_shape_vec((n, d), mask).map_err(|e| Error::Shape(e.to_string()))?,
        provenance: schema.provenance,
        groups: schema.group.as_ref().map(|_| groups),
        group_names: schema
            .group
            .as_ref()
            .map(|(_, v)| v.clone())
            .unwrap_or_default(),
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Schema for the public predictive-maintenance benchmark file layout.
/// Failure-mode indicator columns leak the label and are skipped; the product
/// type is one-hot encoded.
pub fn ai4i2020_schema() -> ColumnSchema {
    let cat = |v: &[&str]| ColumnKind::Categorical(v.iter().map(|s| s.to_string()).collect());
    ColumnSchema {
        label: "Machine failure".into(),
        label_map: vec![("0".into(), 0), ("1".into(), 1)],
        columns: vec![
            ("UDI".into(), ColumnKind::Skip),
            ("Product ID".into(), ColumnKind::Skip),
            ("Type".into(), cat(&["L", "M", "H"])),
            ("Air temperature [K]".into(), ColumnKind::Numeric),
            ("Process temperature [K]".into(), ColumnKind::Numeric),
            ("Rotational speed [rpm]".into(), ColumnKind::Numeric),
            ("Torque [Nm]".into(), ColumnKind::Numeric),
            ("Tool wear [min]".into(), ColumnKind::Numeric),
            ("TWF".into(), ColumnKind::Skip),
            ("HDF".into(), ColumnKind::Skip),
            ("PWF".into(), ColumnKind::Skip),
            ("OSF".into(), ColumnKind::Skip),
            ("RNF".into(), ColumnKind::Skip),
        ],
        group: None,
        provenance: Provenance::Ai4i2020,
    }
}

/// Schema for the truck component-failure file layout: a pos/neg class column
/// followed by 170 anonymized operational measurements ("na" marks missing).
pub fn scania_schema() -> ColumnSchema {
    let mut columns = Vec::with_capacity(170);
    for i in 0..170 {
        columns.push((format!("aa_{i:03}"), ColumnKind::Numeric));
    }
    ColumnSchema {
        label: "class".into(),
        label_map: vec![("neg".into(), 0), ("pos".into(), 1)],
        columns,
        group: None,
        provenance: Provenance::Scania,
    }
}

/// Ten raw S.M.A.R.T. attributes used to predict same-day drive failure.
pub fn harddrive_schema() -> ColumnSchema {
    let mut columns = vec![
        ("date".into(), ColumnKind::Skip),
        ("serial_number".into(), ColumnKind::Skip),
        ("model".into(), ColumnKind::Skip),
        ("capacity_bytes".into(), ColumnKind::Skip),
    ];
    for id in [3, 5, 7, 187, 188, 190, 194, 197, 198, 199] {
        columns.push((format!("smart_{id}_raw"), ColumnKind::Numeric));
    }
    ColumnSchema {
        label: "failure".into(),
        label_map: vec![("0".into(), 0), ("1".into(), 1)],
        columns,
        group: None,
        provenance: Provenance::HardDrive,
    }
}

/// Quality-inspection layout: four product variants as natural groups and 138
/// anonymized measurements, not all of which are populated for every variant.
pub fn fladi_schema() -> ColumnSchema {
    let mut columns = Vec::with_capacity(138);
    for i in 0..138 {
        columns.push((format!("f_{i:03}"), ColumnKind::Numeric));
    }
    ColumnSchema {
        label: "quality_fail".into(),
        label_map: vec![("0".into(), 0), ("1".into(), 1)],
        columns,
        group: Some((
            "variant".into(),
            vec!["V1".into(), "V2".into(), "V3".into(), "V4".into()],
        )),
        provenance: Provenance::FladiLike,
    }
}

/// Plain numeric layout for generated data: label plus x_0..x_{d-1}.
pub fn synthetic_schema(d: usize) -> ColumnSchema {
    ColumnSchema {
        label: "label".into(),
        label_map: vec![("0".into(), 0), ("1".into(), 1)],
        columns: (0..d)
            .map(|i| (format!("x_{i}"), ColumnKind::Numeric))
            .collect(),
        group: None,
        provenance: Provenance::Synthetic,
    }
}
