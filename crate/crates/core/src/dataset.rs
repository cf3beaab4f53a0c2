//! Tabular binary-classification data: CSV ingestion against a column schema,
//! z-score standardization and feature subsetting.
//!
//! Schema files are TOML:
//!
//! ```toml
//! positive = "1"          # label token mapped to 1
//! negative = "0"          # label token mapped to 0
//!
//! [columns]
//! age = "numeric"
//! famhist = { categorical = { Present = 1, Absent = 0 } }
//! chd = "label"
//! ```
//!
//! Feature order follows the CSV header, with the label column removed.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    feature_names: Vec<String>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Matrix, feature_names: Vec<String>, labels: Vec<u8>) -> Result<Self> {
        if features.cols() != feature_names.len() {
            return Err(Error::Dimension {
                expected: features.cols(),
                got: feature_names.len(),
            });
        }
        if features.rows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if features.rows() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least 2 rows, got {}",
                features.rows()
            )));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidInput("dataset has no feature columns".into()));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate feature name {name:?}"
                )));
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not binary")));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            feature_names,
            labels,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Removes the named feature columns. Remaining columns keep their order.
    pub fn drop_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let mut drop = HashSet::new();
        for name in names {
            drop.insert(self.feature_index(name.as_ref())?);
        }
        let keep: Vec<usize> = (0..self.d()).filter(|j| !drop.contains(j)).collect();
        self.select_indices(&keep)
    }

    /// Keeps only the named features, in the given order.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|n| self.feature_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.select_indices(&idx)
    }

    pub fn select_indices(&self, cols: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.features.select_columns(cols),
            cols.iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            self.labels.clone(),
        )
    }

    pub fn standardize(&self) -> Result<(Dataset, ScalerParams)> {
        let params = ScalerParams::fit(self)?;
        let ds = params.transform(self)?;
        Ok((ds, params))
    }
}

/// Per-column z-score parameters (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let n = ds.n() as f64;
        let mut mean = Vec::with_capacity(ds.d());
        let mut std = Vec::with_capacity(ds.d());
        for j in 0..ds.d() {
            let col = ds.features.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = var.sqrt();
            if s <= 1e-12 * m.abs().max(1.0) {
                return Err(Error::ConstantColumn(ds.feature_names[j].clone()));
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Self {
            feature_names: ds.feature_names.clone(),
            mean,
            std,
        })
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if ds.feature_names != self.feature_names {
            return Err(Error::InvalidInput(
                "scaler was fitted on a different feature set".into(),
            ));
        }
        Ok(())
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut m = ds.features.clone();
        for i in 0..m.rows() {
            self.transform_row(m.row_mut(i));
        }
        Dataset::new(m, ds.feature_names.clone(), ds.labels.clone())
    }

    pub fn inverse(&self, ds: &Dataset) -> Result<Dataset> {
        self.check(ds)?;
        let mut m = ds.features.clone();
        for i in 0..m.rows() {
            self.inverse_row(m.row_mut(i));
        }
        Dataset::new(m, ds.feature_names.clone(), ds.labels.clone())
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn inverse_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum KindSpec {
    Simple(String),
    Categorical { categorical: BTreeMap<String, i64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SchemaFile {
    positive: String,
    negative: String,
    columns: BTreeMap<String, KindSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    Categorical(BTreeMap<String, i64>),
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    columns: BTreeMap<String, ColumnKind>,
    label: String,
    positive: String,
    negative: String,
}

impl Schema {
    pub fn new(
        columns: BTreeMap<String, ColumnKind>,
        positive: impl Into<String>,
        negative: impl Into<String>,
    ) -> Result<Self> {
        let labels: Vec<&String> = columns
            .iter()
            .filter(|(_, k)| matches!(k, ColumnKind::Label))
            .map(|(n, _)| n)
            .collect();
        if labels.len() != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {}",
                labels.len()
            )));
        }
        let label = labels[0].clone();
        let (positive, negative) = (positive.into(), negative.into());
        if positive == negative {
            return Err(Error::Schema(
                "positive and negative label tokens coincide".into(),
            ));
        }
        Ok(Self {
            columns,
            label,
            positive,
            negative,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        let mut columns = BTreeMap::new();
        for (name, spec) in file.columns {
            let kind = match spec {
                KindSpec::Simple(s) => match s.as_str() {
                    "numeric" => ColumnKind::Numeric,
                    "label" => ColumnKind::Label,
                    other => {
                        return Err(Error::Schema(format!(
                            "column {name:?}: unknown kind {other:?}"
                        )))
                    }
                },
                KindSpec::Categorical { categorical } => ColumnKind::Categorical(categorical),
            };
            columns.insert(name, kind);
        }
        Schema::new(columns, file.positive, file.negative)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate header column {h:?}")));
        }
        if !schema.columns.contains_key(h) {
            return Err(Error::Schema(format!("header column {h:?} not in schema")));
        }
    }
    if let Some(missing) = schema.columns.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(Error::Schema(format!(
            "schema column {missing:?} absent from header"
        )));
    }

    let kinds: Vec<&ColumnKind> = header.iter().map(|h| &schema.columns[h]).collect();
    let feature_names: Vec<String> = header
        .iter()
        .filter(|h| **h != schema.label)
        .cloned()
        .collect();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (j, column) in header.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingCell {
                    column: column.clone(),
                    row,
                });
            }
            match kinds[j] {
                ColumnKind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                        column: column.clone(),
                        token: cell.to_string(),
                        row,
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonNumeric {
                            column: column.clone(),
                            token: cell.to_string(),
                            row,
                        });
                    }
                    data.push(v);
                }
                ColumnKind::Categorical(map) => {
                    let code = map.get(cell).ok_or_else(|| Error::UnknownCategory {
                        column: column.clone(),
                        value: cell.to_string(),
                        row,
                    })?;
                    data.push(*code as f64);
                }
                ColumnKind::Label => {
                    let l = if cell == schema.positive {
                        1
                    } else if cell == schema.negative {
                        0
                    } else {
                        return Err(Error::UnknownCategory {
                            column: column.clone(),
                            value: cell.to_string(),
                            row,
                        });
                    };
                    labels.push(l);
                }
            }
        }
    }
    let features = Matrix::from_vec(labels.len(), feature_names.len(), data)?;
    Dataset::new(features, feature_names, labels)
}
