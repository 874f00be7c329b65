//! Datasets: generation, CSV ingestion/emission, balancing and splitting.
//!
//! The CSV contract is deliberately narrow: UTF-8, comma-separated, one
//! header row, plain decimal-point numbers, no quoting. The label column
//! holds values in `{-1, 1}` or `{0, 1}` (`0` and `-1` both mean negative);
//! an optional probability column holds the true conditional
//! `P[Y = 1 | x]`. Files written by [`emit_csv`] parse back to an identical
//! [`Dataset`], and re-emitting an ingested file reproduces it byte for byte
//! because floats are printed in shortest round-trip form.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::risk::sigmoid;
use crate::seeded::{salt, shuffled_indices, stream};
use crate::Label;

/// Errors from dataset construction, parsing and splitting.
#[derive(Clone, Debug, PartialEq)]
pub enum DataError {
    /// A cell failed to parse as a number. Row and column are 1-based; the
    /// header is row 1.
    ParseError {
        row: usize,
        col: usize,
    },
    /// A named column is missing from the header.
    MissingColumn(String),
    /// A label cell outside `{-1, 0, 1}`.
    NonBinaryLabel {
        row: usize,
        value: f64,
    },
    /// A probability cell outside `[0, 1]`.
    ProbabilityOutOfRange {
        row: usize,
        value: f64,
    },
    /// Rows of inconsistent width.
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    /// Balancing or training requires both classes.
    SingleClassDataset,
    EmptyDataset,
    /// Invalid split fractions.
    FractionError(String),
    Io(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::ParseError { row, col } => {
                write!(f, "cannot parse number at row {row}, column {col}")
            }
            DataError::MissingColumn(name) => write!(f, "missing column '{name}'"),
            DataError::NonBinaryLabel { row, value } => {
                write!(f, "non-binary label {value} at row {row}")
            }
            DataError::ProbabilityOutOfRange { row, value } => {
                write!(f, "probability {value} at row {row} outside [0, 1]")
            }
            DataError::RaggedRow { row, expected, got } => {
                write!(f, "row {row} has {got} cells, expected {expected}")
            }
            DataError::SingleClassDataset => write!(f, "dataset contains a single class"),
            DataError::EmptyDataset => write!(f, "dataset is empty"),
            DataError::FractionError(msg) => write!(f, "invalid split fractions: {msg}"),
            DataError::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for DataError {}

/// A labeled dataset with optional true conditional probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Feature column names, in storage order.
    pub columns: Vec<String>,
    /// Row-major feature matrix.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// True `P[Y = 1 | x]` per row, when known.
    pub p_true: Option<Vec<f64>>,
    /// Column name used for labels on emission.
    pub label_column: String,
    /// Column name used for the probability column on emission.
    pub p_column: Option<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            p_true: self
                .p_true
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i]).collect()),
            label_column: self.label_column.clone(),
            p_column: self.p_column.clone(),
        }
    }

    /// Same features and probabilities with replaced labels.
    pub fn with_labels(&self, labels: Vec<Label>) -> Dataset {
        assert_eq!(labels.len(), self.len());
        Dataset {
            labels,
            ..self.clone()
        }
    }

    /// Count of positive labels.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == Label::Pos).count()
    }
}

/// 2-d synthetic data: features uniform on `[-3, 3]^2`, labels drawn from
/// `P[Y = 1 | x] = sigmoid(0.5 x2 - 0.2 x1^2)`; the probability is stored.
pub fn gen_synthetic(n: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, salt::DATA_GEN);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut p_true = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(-3.0..=3.0);
        let x2 = rng.gen_range(-3.0..=3.0);
        let p = sigmoid(0.5 * x2 - 0.2 * x1 * x1);
        let y = if rng.gen::<f64>() < p {
            Label::Pos
        } else {
            Label::Neg
        };
        features.push(vec![x1, x2]);
        labels.push(y);
        p_true.push(p);
    }
    Dataset {
        columns: vec!["x1".into(), "x2".into()],
        features,
        labels,
        p_true: Some(p_true),
        label_column: "label".into(),
        p_column: Some("p_true".into()),
    }
}

/// Credit-scoring stand-in with 10 features.
///
/// Recipe: utilization ∈ [0,1] (squared uniform), age ∈ [21, 80], three
/// small delinquency counts, log-normal-ish income and debt ratio, open
/// credit lines, real-estate loans, dependents. The planted default
/// probability is a logistic in utilization, delinquencies, debt ratio,
/// income and age, plus a mild utilization-delinquency interaction; feature
/// noise keeps it imperfectly learnable.
pub fn gen_credit_like(n: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, salt::DATA_GEN);
    let columns = vec![
        "utilization".to_string(),
        "age".to_string(),
        "late_30_59".to_string(),
        "debt_ratio".to_string(),
        "monthly_income".to_string(),
        "open_lines".to_string(),
        "late_90".to_string(),
        "real_estate_loans".to_string(),
        "late_60_89".to_string(),
        "dependents".to_string(),
    ];
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut p_true = Vec::with_capacity(n);
    for _ in 0..n {
        let util: f64 = rng.gen::<f64>().powi(2);
        let age: f64 = rng.gen_range(21.0..80.0);
        let late_a: f64 = (rng.gen::<f64>() * 3.0 * util).floor();
        let debt: f64 = (rng.gen::<f64>() * 1.2).powi(2);
        let income: f64 = 2000.0 * (1.5 * rng.gen::<f64>() + 0.6 * rng.gen::<f64>()).exp();
        let lines: f64 = (1.0 + rng.gen::<f64>() * 12.0).floor();
        let late_c: f64 = (rng.gen::<f64>() * 2.2 * util).floor();
        let estate: f64 = (rng.gen::<f64>() * 3.0).floor();
        let late_b: f64 = (rng.gen::<f64>() * 2.0 * util).floor();
        let deps: f64 = (rng.gen::<f64>() * 4.0).floor();
        let z = -1.1 + 2.4 * util + 0.55 * late_a + 0.8 * late_c + 0.6 * late_b + 0.5 * debt
            - 0.00018 * (income - 6000.0)
            - 0.012 * (age - 50.0)
            + 0.35 * util * (late_a + late_b)
            - 0.03 * lines;
        let p = sigmoid(z);
        let y = if rng.gen::<f64>() < p {
            Label::Pos
        } else {
            Label::Neg
        };
        features.push(vec![
            util, age, late_a, debt, income, lines, late_c, estate, late_b, deps,
        ]);
        labels.push(y);
        p_true.push(p);
    }
    Dataset {
        columns,
        features,
        labels,
        p_true: Some(p_true),
        label_column: "default".into(),
        p_column: Some("p_true".into()),
    }
}

/// Income-prediction stand-in with mixed integer-coded and continuous
/// features (worker class, education, marital status, occupation group,
/// sex, hours per week, age, usual weeks worked). The planted probability
/// of high income is a logistic in education, hours, age and codes.
pub fn gen_folktables_like(n: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, salt::DATA_GEN);
    let columns = vec![
        "worker_class".to_string(),
        "education".to_string(),
        "marital".to_string(),
        "occupation".to_string(),
        "sex".to_string(),
        "hours_per_week".to_string(),
        "age".to_string(),
        "weeks_worked".to_string(),
    ];
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut p_true = Vec::with_capacity(n);
    for _ in 0..n {
        let worker: f64 = (rng.gen::<f64>() * 8.0).floor();
        let edu: f64 = 1.0 + (rng.gen::<f64>() * 24.0).floor();
        let marital: f64 = (rng.gen::<f64>() * 5.0).floor();
        let occ: f64 = (rng.gen::<f64>() * 10.0).floor();
        let sex: f64 = (rng.gen::<f64>() * 2.0).floor();
        let hours: f64 = (10.0 + rng.gen::<f64>() * 60.0).floor();
        let age: f64 = (17.0 + rng.gen::<f64>() * 60.0).floor();
        let weeks: f64 = (20.0 + rng.gen::<f64>() * 32.0).floor();
        let z = -6.2 + 0.23 * edu + 0.05 * hours + 0.028 * age + 0.012 * weeks
            - 0.35 * (occ > 6.0) as u8 as f64
            + 0.25 * (worker == 3.0) as u8 as f64
            - 0.2 * (marital == 4.0) as u8 as f64
            + 0.1 * sex;
        let p = sigmoid(z);
        let y = if rng.gen::<f64>() < p {
            Label::Pos
        } else {
            Label::Neg
        };
        features.push(vec![worker, edu, marital, occ, sex, hours, age, weeks]);
        labels.push(y);
        p_true.push(p);
    }
    Dataset {
        columns,
        features,
        labels,
        p_true: Some(p_true),
        label_column: "high_income".into(),
        p_column: Some("p_true".into()),
    }
}

/// Parses a CSV file with the schema described in the module docs.
pub fn ingest_csv(
    path: &Path,
    label_column: &str,
    p_column: Option<&str>,
) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io(e.to_string()))?;
    ingest_csv_str(&text, label_column, p_column)
}

/// String-based variant of [`ingest_csv`].
pub fn ingest_csv_str(
    text: &str,
    label_column: &str,
    p_column: Option<&str>,
) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::EmptyDataset)?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let label_idx = names
        .iter()
        .position(|&c| c == label_column)
        .ok_or_else(|| DataError::MissingColumn(label_column.to_string()))?;
    let p_idx = match p_column {
        Some(name) => Some(
            names
                .iter()
                .position(|&c| c == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))?,
        ),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..names.len())
        .filter(|&i| i != label_idx && Some(i) != p_idx)
        .collect();
    let columns: Vec<String> = feature_idx.iter().map(|&i| names[i].to_string()).collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut p_true: Option<Vec<f64>> = p_idx.map(|_| Vec::new());
    for (line_no, line) in lines {
        let row = line_no + 1; // 1-based, header is row 1
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(DataError::RaggedRow {
                row,
                expected: names.len(),
                got: cells.len(),
            });
        }
        let parse = |i: usize| -> Result<f64, DataError> {
            cells[i]
                .parse::<f64>()
                .map_err(|_| DataError::ParseError { row, col: i + 1 })
        };
        let raw_label = parse(label_idx)?;
        let label = Label::from_numeric(raw_label).ok_or(DataError::NonBinaryLabel {
            row,
            value: raw_label,
        })?;
        if let (Some(pi), Some(ps)) = (p_idx, p_true.as_mut()) {
            let p = parse(pi)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::ProbabilityOutOfRange { row, value: p });
            }
            ps.push(p);
        }
        let mut x = Vec::with_capacity(feature_idx.len());
        for &i in &feature_idx {
            x.push(parse(i)?);
        }
        features.push(x);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(Dataset {
        columns,
        features,
        labels,
        p_true,
        label_column: label_column.to_string(),
        p_column: p_column.map(str::to_string),
    })
}

/// Serializes a dataset in the ingestion schema: feature columns in order,
/// then the label column, then the probability column when present.
pub fn emit_csv_string(ds: &Dataset) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = ds.columns.iter().map(String::as_str).collect();
    header.push(&ds.label_column);
    if let (Some(_), Some(name)) = (&ds.p_true, &ds.p_column) {
        header.push(name);
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.len() {
        let mut cells: Vec<String> = ds.features[i].iter().map(|v| format!("{v}")).collect();
        cells.push(ds.labels[i].to_string());
        if let Some(p) = &ds.p_true {
            cells.push(format!("{}", p[i]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes [`emit_csv_string`] to a file.
pub fn emit_csv(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut f = std::fs::File::create(path).map_err(|e| DataError::Io(e.to_string()))?;
    f.write_all(emit_csv_string(ds).as_bytes())
        .map_err(|e| DataError::Io(e.to_string()))
}

/// Random undersample of the majority class down to the minority count,
/// followed by a seeded shuffle of the kept rows.
pub fn balance_classes(ds: &Dataset, seed: u64) -> Result<Dataset, DataError> {
    if ds.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let pos: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == Label::Pos)
        .collect();
    let neg: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == Label::Neg)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(DataError::SingleClassDataset);
    }
    let mut rng = stream(seed, salt::BALANCE);
    let (minority, majority) = if pos.len() <= neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    };
    let mut keep = minority.clone();
    let order = shuffled_indices(majority.len(), &mut rng);
    keep.extend(order.into_iter().take(minority.len()).map(|k| majority[k]));
    let final_order = shuffled_indices(keep.len(), &mut rng);
    let idx: Vec<usize> = final_order.into_iter().map(|k| keep[k]).collect();
    Ok(ds.subset(&idx))
}

/// How to partition a dataset.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Seeded shuffle, then contiguous cuts. Sizes are floored for all parts
    /// but the last, which takes the remainder when the fractions sum to 1.
    Fractions { fractions: Vec<f64>, seed: u64 },
    /// 70/30, then 70/30 of the first part: train/validation/test of
    /// relative sizes 49/21/30.
    TwoStage { seed: u64 },
}

/// Splits a dataset into disjoint parts whose union is the input.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Vec<Dataset>, DataError> {
    match spec {
        SplitSpec::Fractions { fractions, seed } => {
            if fractions.is_empty() {
                return Err(DataError::FractionError("no fractions".into()));
            }
            if fractions.iter().any(|&f| !f.is_finite() || f <= 0.0) {
                return Err(DataError::FractionError(
                    "fractions must be positive".into(),
                ));
            }
            let sum: f64 = fractions.iter().sum();
            if sum > 1.0 + 1e-9 {
                return Err(DataError::FractionError(format!(
                    "fractions sum to {sum} > 1"
                )));
            }
            let n = ds.len();
            let mut rng = stream(*seed, salt::SPLIT);
            let order = shuffled_indices(n, &mut rng);
            let mut sizes: Vec<usize> = fractions.iter().map(|&f| floor_count(f, n)).collect();
            let used: usize = sizes.iter().take(sizes.len() - 1).sum();
            if (sum - 1.0).abs() <= 1e-9 {
                *sizes.last_mut().unwrap() = n - used;
            }
            let mut parts = Vec::with_capacity(sizes.len());
            let mut start = 0;
            for &s in &sizes {
                parts.push(ds.subset(&order[start..start + s]));
                start += s;
            }
            Ok(parts)
        }
        SplitSpec::TwoStage { seed } => {
            let n = ds.len();
            let mut rng = stream(*seed, salt::SPLIT);
            let order = shuffled_indices(n, &mut rng);
            let first = floor_count(0.7, n);
            let test = ds.subset(&order[first..]);
            let head = &order[..first];
            let train_n = floor_count(0.7, first);
            let train = ds.subset(&head[..train_n]);
            let val = ds.subset(&head[train_n..]);
            Ok(vec![train, val, test])
        }
    }
}

/// `floor(f * n)` with a tolerance so that products that are integral in
/// exact arithmetic (like 0.7 * 700) do not round down.
fn floor_count(f: f64, n: usize) -> usize {
    (f * n as f64 + 1e-9).floor() as usize
}
