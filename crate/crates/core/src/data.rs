//! CSV ingestion, feature scaling, splits and evaluation metrics.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DataKind, Dataset, Record};
use crate::rng::rng_from_seed;

/// Load a numeric CSV with a header row. Features keep column order, minus the label.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, kind: DataKind) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, label_column, kind)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str, kind: DataKind) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Csv(format!("label column '{label_column}' not found")))?;
    let width = headers.len();

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        // row numbers are 1-based and count the header
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Csv(format!("row {line}: {e}")))?;
        if rec.len() != width {
            return Err(Error::Csv(format!(
                "row {line} has {} fields, header has {width}",
                rec.len()
            )));
        }
        let mut features = Vec::with_capacity(width - 1);
        let mut label = 0.0;
        for (col, cell) in rec.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                Error::Csv(format!(
                    "non-numeric cell '{cell}' at row {line}, column '{}'",
                    &headers[col]
                ))
            })?;
            if col == label_idx {
                label = value;
            } else {
                features.push(value);
            }
        }
        records.push(Record::new(features, label));
    }
    if records.is_empty() {
        return Err(Error::Empty("csv file has no data rows".into()));
    }
    Dataset::new(kind, records)
}

/// Write a dataset as CSV, label last, with columns `x1..xd,y`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Csv(e.to_string()))?;
    let mut header: Vec<String> = (1..=data.d()).map(|k| format!("x{k}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for (x, y) in data.iter() {
        let row: Vec<String> = x.iter().chain(std::iter::once(&y)).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-column min-max statistics, reusable on new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Columns with `max == min`; they map to 0.
    pub constant_columns: Vec<usize>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Self {
        Self::fit_matrix(data.feature_matrix(), data.d())
    }

    fn fit_matrix(features: &[f64], d: usize) -> Self {
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in features.chunks_exact(d) {
            for k in 0..d {
                min[k] = min[k].min(row[k]);
                max[k] = max[k].max(row[k]);
            }
        }
        let constant_columns = (0..d).filter(|&k| !(max[k] > min[k])).collect();
        Self { min, max, constant_columns }
    }

    fn apply_matrix(&self, features: &mut [f64]) {
        let d = self.min.len();
        for row in features.chunks_exact_mut(d) {
            for k in 0..d {
                let range = self.max[k] - self.min[k];
                row[k] = if range > 0.0 { (row[k] - self.min[k]) / range } else { 0.0 };
            }
        }
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.d() != self.min.len() {
            return Err(Error::DimensionMismatch { expected: self.min.len(), got: data.d() });
        }
        let mut features = data.feature_matrix().to_vec();
        self.apply_matrix(&mut features);
        Ok(data.with_features(features))
    }
}

pub(crate) fn minmax_in_place(features: &mut [f64], d: usize) {
    MinMaxScaler::fit_matrix(features, d).apply_matrix(features);
}

/// Scale every feature column to `[0, 1]`.
pub fn minmax_scale(data: &Dataset) -> (Dataset, MinMaxScaler) {
    let scaler = MinMaxScaler::fit(data);
    let scaled = scaler.transform(data).expect("scaler fitted on the same dataset");
    (scaled, scaler)
}

/// Uniform random partition; the test part has `round(n · test_frac)` records.
pub fn train_test_split(data: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 records to split, got {}",
            data.len()
        )));
    }
    if !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidArgument(format!("test fraction {test_frac} outside [0, 1)")));
    }
    let n_test = (data.len() as f64 * test_frac).round() as usize;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let (test, train) = idx.split_at(n_test);
    Ok((data.subset(train), data.subset(test)))
}

fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: b.len(), got: a.len() });
    }
    if a.is_empty() {
        return Err(Error::Empty("rmse of empty vectors".into()));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(mse.sqrt())
}

/// Root mean squared coordinate error between an estimate and the truth.
pub fn param_rmse(theta_hat: &[f64], theta_true: &[f64]) -> Result<f64> {
    rmse(theta_hat, theta_true)
}

pub fn predictive_rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    rmse(predictions, targets)
}

/// Mann–Whitney AUC: share of (positive, negative) pairs ranked correctly, ties ½.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    let mut pairs: Vec<(f64, bool)> =
        scores.iter().zip(labels).map(|(&s, &y)| (s, y == 1.0)).collect();
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("ROC-AUC needs both classes".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j + 1 < pairs.len() && pairs[j + 1].0 == pairs[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * pairs[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Evaluation of one release.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub param_rmse: Option<f64>,
    pub predictive_rmse: Option<f64>,
    pub roc_auc: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}
