//! Labelled expression data: CSV ingestion, the reference logistic fit and
//! the two-armed classification environment built from it.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use vbts::env::{ContextDist, EnvSpec, PairedRows};
use vbts::sparse_linear::logistic_lasso_cv;
use vbts::{seeded_rng, ColumnDesign};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    None,
    /// `log2(1 + x)`.
    Log2,
}

#[derive(Debug, Clone)]
pub struct LabelledTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetBundle {
    pub feature_names: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
    #[serde(skip)]
    pub labels: Vec<u8>,
    /// Coefficients of the cross-validated logistic lasso.
    pub beta_ref: Vec<f64>,
    pub intercept: f64,
    pub penalty: f64,
    /// `sqrt(deviance / (n - df))` with `df` counting the intercept and
    /// the nonzero coefficients.
    pub noise_scale: f64,
    pub class0: Vec<usize>,
    pub class1: Vec<usize>,
}

impl DatasetBundle {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.beta_ref.iter().filter(|b| **b != 0.0).count()
    }
}

/// Parse a headed CSV; every column other than `label_col` is a feature.
pub fn read_labelled_csv(path: &Path, label_col: &str, transform: Transform) -> Result<LabelledTable> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_labelled(file, label_col, transform)
}

pub fn parse_labelled<R: std::io::Read>(input: R, label_col: &str, transform: Transform) -> Result<LabelledTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| HarnessError::data(format!("no column named '{label_col}'")))?;
    let feature_names: Vec<String> =
        header.iter().enumerate().filter(|(i, _)| *i != label_idx).map(|(_, h)| h.clone()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != header.len() {
            return Err(HarnessError::data(format!(
                "row {line}: expected {} cells, found {}",
                header.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                HarnessError::data(format!("row {line}, column '{}': '{cell}' is not numeric", header[c]))
            })?;
            if !value.is_finite() {
                return Err(HarnessError::data(format!("row {line}, column '{}': non-finite value", header[c])));
            }
            if c == label_idx {
                labels.push(match value {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => {
                        return Err(HarnessError::data(format!(
                            "row {line}, column '{label_col}': label '{cell}' is not 0 or 1"
                        )))
                    }
                });
                continue;
            }
            let value = match transform {
                Transform::None => value,
                Transform::Log2 => {
                    if value <= -1.0 {
                        return Err(HarnessError::data(format!(
                            "row {line}, column '{}': log2(1 + x) undefined for {value}",
                            header[c]
                        )));
                    }
                    value.ln_1p() / std::f64::consts::LN_2
                }
            };
            row.push(value);
        }
        rows.push(row);
    }
    for class in [0u8, 1] {
        if !labels.contains(&class) {
            return Err(HarnessError::data(format!("column '{label_col}' has no rows labelled {class}")));
        }
    }
    Ok(LabelledTable { feature_names, rows, labels })
}

/// Fit the reference parameter and noise scale for a labelled table.
pub fn fit_bundle(table: LabelledTable, folds: usize) -> Result<DatasetBundle> {
    let d = table.feature_names.len();
    let design = ColumnDesign::from_rows(&table.rows, d)?;
    let y: Vec<f64> = table.labels.iter().map(|&l| f64::from(l)).collect();
    let path_len = 30;
    let fit = logistic_lasso_cv(&design, &y, folds, path_len)?;
    let n = table.rows.len();
    let df = 1 + fit.coefficients.iter().filter(|b| **b != 0.0).count();
    let noise_scale = (fit.deviance / n.saturating_sub(df).max(1) as f64).sqrt();
    let class0 = (0..n).filter(|&i| table.labels[i] == 0).collect();
    let class1 = (0..n).filter(|&i| table.labels[i] == 1).collect();
    Ok(DatasetBundle {
        feature_names: table.feature_names,
        rows: table.rows,
        labels: table.labels,
        beta_ref: fit.coefficients,
        intercept: fit.intercept,
        penalty: fit.penalty,
        noise_scale,
        class0,
        class1,
    })
}

pub fn ingest_dataset(path: &Path, label_col: &str, transform: Transform, folds: usize) -> Result<DatasetBundle> {
    fit_bundle(read_labelled_csv(path, label_col, transform)?, folds)
}

/// Two-armed environment: each round shows one row of each class in random
/// order; rewards are `<x, beta_ref>` plus Gaussian noise.
pub fn dataset_env(bundle: &DatasetBundle, noise_sigma: Option<f64>) -> Result<EnvSpec> {
    let pairs = PairedRows::new(bundle.rows.clone(), &bundle.labels)?;
    let sigma = noise_sigma.unwrap_or(bundle.noise_scale);
    Ok(EnvSpec::new(2, ContextDist::DatasetPairs(Arc::new(pairs)), bundle.beta_ref.clone(), sigma)?)
}

/// Shape of the synthetic stand-in for the expression data.
pub const MIMIC_ROWS: usize = 168;
pub const MIMIC_FEATURES: usize = 2905;
pub const MIMIC_CLASS0: usize = 111;
pub const MIMIC_SUPPORT: usize = 18;
/// Class-1 mean shift on each informative feature, in noise units.
pub const MIMIC_SHIFT: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Mimic {
    pub table: LabelledTable,
    /// Indices of the informative features.
    pub support: Vec<usize>,
    /// Sign of the class-1 shift on each informative feature.
    pub signs: Vec<f64>,
}

/// Standard-normal features; class 1 is shifted on 18 features.
pub fn generate_mimic(seed: u64) -> Mimic {
    let mut rng = seeded_rng(seed);
    let mut labels: Vec<u8> = (0..MIMIC_ROWS).map(|i| u8::from(i >= MIMIC_CLASS0)).collect();
    labels.shuffle(&mut rng);
    let mut support: Vec<usize> = rand::seq::index::sample(&mut rng, MIMIC_FEATURES, MIMIC_SUPPORT).into_vec();
    support.sort_unstable();
    let signs: Vec<f64> = support.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            let mut row: Vec<f64> = (0..MIMIC_FEATURES).map(|_| rng.sample(StandardNormal)).collect();
            if l == 1 {
                for (&j, s) in support.iter().zip(&signs) {
                    row[j] += s * MIMIC_SHIFT;
                }
            }
            row
        })
        .collect();
    let feature_names = (0..MIMIC_FEATURES).map(|j| format!("g{j:04}")).collect();
    Mimic { table: LabelledTable { feature_names, rows, labels }, support, signs }
}

/// Write a labelled table as CSV with the label in a column named `label`.
pub fn write_labelled_csv(table: &LabelledTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = table.feature_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in table.rows.iter().zip(&table.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}
