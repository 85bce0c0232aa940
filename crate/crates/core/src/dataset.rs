//! Tabular datasets: CSV ingestion, seeded train/test split and feature ranges.
//!
//! Two ranges are kept per feature. `feature_min`/`feature_max` span every
//! instance and bound rule intervals and matrix cells. `train_min`/`train_max`
//! span the train split only and normalise counterfactual deltas.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_train_fraction() -> f64 {
    0.7
}

/// How to interpret a CSV file as a labelled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Fixes the class order. When absent, classes are numbered in order of
    /// first appearance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            class_names: None,
            train_fraction: default_train_fraction(),
            split_seed: 0,
        }
    }

    pub fn with_split(mut self, train_fraction: f64, split_seed: u64) -> Self {
        self.train_fraction = train_fraction;
        self.split_seed = split_seed;
        self
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = Some(names);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    class_names: Vec<String>,
    instances: Vec<Vec<f64>>,
    labels: Vec<usize>,
    train_mask: Vec<bool>,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    train_min: Vec<f64>,
    train_max: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        class_names: Vec<String>,
        instances: Vec<Vec<f64>>,
        labels: Vec<usize>,
        train_mask: Vec<bool>,
    ) -> Result<Self> {
        let m = feature_names.len();
        if m == 0 {
            return Err(Error::Schema("dataset has no features".into()));
        }
        if class_names.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 classes, found {}",
                class_names.len()
            )));
        }
        if instances.is_empty() {
            return Err(Error::Schema("dataset has no instances".into()));
        }
        if labels.len() != instances.len() || train_mask.len() != instances.len() {
            return Err(Error::Schema(format!(
                "{} instances but {} labels and {} split flags",
                instances.len(),
                labels.len(),
                train_mask.len()
            )));
        }
        for (n, (row, &label)) in instances.iter().zip(&labels).enumerate() {
            if row.len() != m {
                return Err(Error::Schema(format!(
                    "instance {n} has {} values, expected {m}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("instance {n} has non-finite value {v}")));
            }
            if label >= class_names.len() {
                return Err(Error::Schema(format!(
                    "instance {n} has label {label}, only {} classes",
                    class_names.len()
                )));
            }
        }

        let (feature_min, feature_max) = extrema(instances.iter().map(Vec::as_slice), m);
        let train_rows = instances
            .iter()
            .zip(&train_mask)
            .filter(|(_, &t)| t)
            .map(|(r, _)| r.as_slice());
        let (mut train_min, mut train_max) = extrema(train_rows, m);
        if !train_mask.iter().any(|&t| t) {
            train_min = feature_min.clone();
            train_max = feature_max.clone();
        }

        Ok(Self {
            feature_names,
            class_names,
            instances,
            labels,
            train_mask,
            feature_min,
            feature_max,
            train_min,
            train_max,
        })
    }

    /// Same data with a different train/test partition.
    pub fn with_train_mask(&self, train_mask: Vec<bool>) -> Result<Self> {
        Self::new(
            self.feature_names.clone(),
            self.class_names.clone(),
            self.instances.clone(),
            self.labels.clone(),
            train_mask,
        )
    }

    pub fn from_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Self> {
        if !(0.0..=1.0).contains(&schema.train_fraction) {
            return Err(Error::Schema(format!(
                "train_fraction {} outside [0, 1]",
                schema.train_fraction
            )));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let label_idx = headers
            .iter()
            .position(|h| h == schema.label_column)
            .ok_or_else(|| {
                Error::Schema(format!("label column {:?} not in header", schema.label_column))
            })?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.to_string())
            .collect();

        let mut class_names = schema.class_names.clone().unwrap_or_default();
        let fixed_classes = schema.class_names.is_some();
        let mut instances = Vec::new();
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != headers.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            let mut row = Vec::with_capacity(feature_names.len());
            for (i, field) in record.iter().enumerate() {
                if i == label_idx {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {:?}: {field:?} is not a number", &headers[i]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {:?}: non-finite value", &headers[i]),
                    });
                }
                row.push(v);
            }
            let label = &record[label_idx];
            let class = match class_names.iter().position(|c| c == label) {
                Some(c) => c,
                None if fixed_classes => {
                    return Err(Error::Schema(format!(
                        "line {line}: unknown label {label:?}"
                    )))
                }
                None => {
                    class_names.push(label.to_string());
                    class_names.len() - 1
                }
            };
            instances.push(row);
            labels.push(class);
        }
        if class_names.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 classes, found {}",
                class_names.len()
            )));
        }
        let train_mask = split_mask(instances.len(), schema.train_fraction, schema.split_seed);
        Self::new(feature_names, class_names, instances, labels, train_mask)
    }

    /// Writes the data back as CSV with the label in the last column.
    pub fn to_csv_string(&self, label_column: &str) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        // Writing into a Vec cannot fail.
        w.write_record(&header).expect("in-memory csv");
        for (row, &label) in self.instances.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(self.class_names[label].clone());
            w.write_record(&fields).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    pub fn instance(&self, n: usize) -> Option<&[f64]> {
        self.instances.get(n).map(Vec::as_slice)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn train_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.train_mask
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| i)
    }

    pub fn test_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.train_mask
            .iter()
            .enumerate()
            .filter(|(_, &t)| !t)
            .map(|(i, _)| i)
    }

    pub fn n_train(&self) -> usize {
        self.train_mask.iter().filter(|&&t| t).count()
    }

    /// Per-feature minimum over all instances.
    pub fn feature_min(&self) -> &[f64] {
        &self.feature_min
    }

    /// Per-feature maximum over all instances.
    pub fn feature_max(&self) -> &[f64] {
        &self.feature_max
    }

    /// Per-feature minimum over the train split.
    pub fn train_min(&self) -> &[f64] {
        &self.train_min
    }

    /// Per-feature maximum over the train split.
    pub fn train_max(&self) -> &[f64] {
        &self.train_max
    }

    pub fn train_range(&self, m: usize) -> f64 {
        (self.train_max[m] - self.train_min[m]).abs()
    }

    /// Fails unless `instance` has one finite value per feature.
    pub fn check_instance(&self, instance: &[f64]) -> Result<()> {
        if instance.len() != self.n_features() {
            return Err(Error::Input(format!(
                "instance has {} values, expected {}",
                instance.len(),
                self.n_features()
            )));
        }
        if let Some((m, v)) = instance.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!("feature {m} is not finite ({v})")));
        }
        Ok(())
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Dataset::from_csv_reader(std::io::BufReader::new(file), schema)
}

/// Seeded uniform shuffle; the first `round(fraction * n)` shuffled rows train.
pub fn split_mask(n: usize, train_fraction: f64, seed: u64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).round() as usize).min(n);
    let mut mask = vec![false; n];
    for &i in &order[..n_train] {
        mask[i] = true;
    }
    mask
}

fn extrema<'a>(rows: impl Iterator<Item = &'a [f64]>, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}
