//! Dataset ingestion, seeded splitting, and classification metrics.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dvae::PhaseLabel;
use crate::elements::{Composition, ElementError};
use crate::nncore::{seeded_rng, sigmoid};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset not found: {0}")]
    FileNotFound(String),
    #[error("row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("row {row}: label `{value}` is not 0 or 1")]
    LabelNotBinary { row: usize, value: String },
    #[error("dataset has no usable rows")]
    EmptyDataset,
    #[error("split sizes total {requested} but the dataset has {available} records")]
    SizesExceedDataset { requested: usize, available: usize },
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("ROC needs at least one positive and one negative label")]
    DegenerateLabels,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlloyRecord {
    pub composition: Composition,
    pub label: PhaseLabel,
}

/// Reads `formula,label` CSV. Rows naming elements outside the vocabulary
/// are skipped; their count is returned alongside the records.
pub fn read_dataset<R: std::io::Read>(reader: R) -> Result<(Vec<AlloyRecord>, usize), DataError> {
    #[derive(Deserialize)]
    struct Row {
        formula: String,
        label: String,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut dropped = 0;
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        // Row numbers are 1-based data rows (header excluded).
        let row_no = i + 1;
        let row = row.map_err(|e| DataError::ParseError {
            row: row_no,
            message: e.to_string(),
        })?;
        let label = match row.label.as_str() {
            "1" => PhaseLabel::SinglePhase,
            "0" => PhaseLabel::MultiPhase,
            other => {
                return Err(DataError::LabelNotBinary {
                    row: row_no,
                    value: other.to_string(),
                })
            }
        };
        match Composition::parse(&row.formula) {
            Ok(composition) => records.push(AlloyRecord { composition, label }),
            Err(ElementError::UnknownElement(_)) => dropped += 1,
            Err(e) => {
                return Err(DataError::ParseError {
                    row: row_no,
                    message: e.to_string(),
                })
            }
        }
    }
    if records.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok((records, dropped))
}

pub fn load_dataset(path: &Path) -> Result<Vec<AlloyRecord>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::FileNotFound(path.display().to_string()),
        _ => DataError::Io(e),
    })?;
    let (records, dropped) = read_dataset(file)?;
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} rows with out-of-vocabulary elements",
            path.display()
        );
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub labelled: usize,
    pub unlabelled: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            labelled: 864,
            unlabelled: 296,
            validation: 75,
            test: 138,
        }
    }
}

impl SplitSizes {
    /// The reduced-label configuration of the data-efficiency comparison.
    pub fn low_label() -> Self {
        Self {
            labelled: 247,
            unlabelled: 790,
            validation: 198,
            test: 138,
        }
    }

    pub fn total(&self) -> usize {
        self.labelled + self.unlabelled + self.validation + self.test
    }
}

/// Index partition of a dataset. Records beyond the requested sizes land in
/// `unused` so the union always covers the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplits {
    pub labelled: Vec<usize>,
    pub unlabelled: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unused: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Labelled,
    Unlabelled,
    Validation,
    Test,
    /// Labelled and unlabelled together.
    Train,
    All,
}

impl std::str::FromStr for SplitName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "labelled" => Self::Labelled,
            "unlabelled" => Self::Unlabelled,
            "validation" | "val" => Self::Validation,
            "test" => Self::Test,
            "train" => Self::Train,
            "all" => Self::All,
            other => return Err(format!("unknown split `{other}`")),
        })
    }
}

impl DataSplits {
    pub fn indices(&self, name: SplitName) -> Vec<usize> {
        match name {
            SplitName::Labelled => self.labelled.clone(),
            SplitName::Unlabelled => self.unlabelled.clone(),
            SplitName::Validation => self.validation.clone(),
            SplitName::Test => self.test.clone(),
            SplitName::Train => [self.labelled.as_slice(), &self.unlabelled].concat(),
            SplitName::All => {
                let mut all = [
                    self.labelled.as_slice(),
                    &self.unlabelled,
                    &self.validation,
                    &self.test,
                    &self.unused,
                ]
                .concat();
                all.sort_unstable();
                all
            }
        }
    }

    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            labelled: self.labelled.len(),
            unlabelled: self.unlabelled.len(),
            validation: self.validation.len(),
            test: self.test.len(),
        }
    }
}

/// Seeded permutation of `0..n_records`, cut in the order
/// labelled / unlabelled / validation / test.
pub fn split(n_records: usize, sizes: SplitSizes, seed: u64) -> Result<DataSplits, DataError> {
    if sizes.total() > n_records {
        return Err(DataError::SizesExceedDataset {
            requested: sizes.total(),
            available: n_records,
        });
    }
    let mut perm: Vec<usize> = (0..n_records).collect();
    perm.shuffle(&mut seeded_rng(seed));
    let mut rest = perm.as_slice();
    let mut take = |n: usize| {
        let (head, tail) = rest.split_at(n);
        rest = tail;
        head.to_vec()
    };
    Ok(DataSplits {
        labelled: take(sizes.labelled),
        unlabelled: take(sizes.unlabelled),
        validation: take(sizes.validation),
        test: take(sizes.test),
        unused: take(n_records - sizes.total()),
        seed,
    })
}

/// Fraction of predictions on the right side of 0.5 (ties count as
/// single phase).
pub fn accuracy(predictions: &[f64], labels: &[PhaseLabel]) -> Result<f64, DataError> {
    if predictions.len() != labels.len() {
        return Err(DataError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| PhaseLabel::from_probability(**p) == **l)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Decreasing; the first entry is +∞ (nothing predicted positive).
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for ((t, f), p) in self.thresholds.iter().zip(&self.fpr).zip(&self.tpr) {
            out.push_str(&format!("{t},{f},{p}\n"));
        }
        out
    }
}

/// ROC over every distinct score; tied scores move along a diagonal
/// segment, so the trapezoidal AUC counts ties as one half.
pub fn roc(predictions: &[f64], labels: &[PhaseLabel]) -> Result<RocCurve, DataError> {
    if predictions.len() != labels.len() {
        return Err(DataError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let pos = labels.iter().filter(|l| l.is_single_phase()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(DataError::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].total_cmp(&predictions[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = predictions[order[i]];
        while i < order.len() && predictions[order[i]] == score {
            if labels[order[i]].is_single_phase() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(score);
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }
    let auc = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * (t[1] + t[0]) / 2.0)
        .sum();
    Ok(RocCurve {
        thresholds,
        tpr,
        fpr,
        auc,
    })
}

pub fn auc(predictions: &[f64], labels: &[PhaseLabel]) -> Result<f64, DataError> {
    roc(predictions, labels).map(|r| r.auc)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, _) = mean_std(&ra);
    let (mb, _) = mean_std(&rb);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Logistic regression fitted by iteratively reweighted least squares with a
/// small ridge term. Used to measure how much phase information a set of
/// latent coordinates carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticProbe {
    /// Feature weights followed by the intercept.
    pub weights: Vec<f64>,
}

impl LogisticProbe {
    const RIDGE: f64 = 1e-6;
    const MAX_ITERS: usize = 100;

    pub fn fit<R: AsRef<[f64]>>(rows: &[R], labels: &[PhaseLabel]) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::LengthMismatch {
                predictions: rows.len(),
                labels: labels.len(),
            });
        }
        let pos = labels.iter().filter(|l| l.is_single_phase()).count();
        if pos == 0 || pos == labels.len() {
            return Err(DataError::DegenerateLabels);
        }
        let d = rows[0].as_ref().len() + 1;
        let design: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                r.as_ref()
                    .iter()
                    .copied()
                    .chain(std::iter::once(1.0))
                    .collect()
            })
            .collect();
        let mut w = vec![0.0; d];
        for _ in 0..Self::MAX_ITERS {
            let mut h = vec![vec![0.0; d]; d];
            let mut g = vec![0.0; d];
            for (x, y) in design.iter().zip(labels) {
                let p = sigmoid(dot(&w, x));
                let s = p * (1.0 - p);
                for i in 0..d {
                    g[i] += (p - y.as_f64()) * x[i];
                    for j in 0..d {
                        h[i][j] += s * x[i] * x[j];
                    }
                }
            }
            for i in 0..d {
                g[i] += Self::RIDGE * w[i];
                h[i][i] += Self::RIDGE;
            }
            let Some(step) = crate::explain::solve(h, g) else {
                break;
            };
            let mut moved = 0.0f64;
            for (wi, si) in w.iter_mut().zip(&step) {
                *wi -= si;
                moved = moved.max(si.abs());
            }
            if moved < 1e-10 {
                break;
            }
        }
        Ok(Self { weights: w })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let (b, w) = self.weights.split_last().expect("probe has an intercept");
        sigmoid(dot(w, row) + b)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
