//! Datasets, CSV ingestion and standardization.

use std::collections::HashMap;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::Serialize;

use crate::{Error, Partition, Result};

/// Header name used for ground-truth labels when writing CSV.
pub const TRUTH_COLUMN: &str = "truth";

/// An `n × p` matrix of finite reals with feature names and optional
/// ground-truth labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    feature_names: Vec<String>,
    truth: Option<Partition>,
}

impl Dataset {
    pub fn new(values: Array2<f64>, feature_names: Vec<String>, truth: Option<Partition>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n >= 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidDataset("need at least one feature".into()));
        }
        if feature_names.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {p} columns",
                feature_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value {v} at row {i}, column {j}"
            )));
        }
        if let Some(t) = &truth {
            if t.len() != n {
                return Err(Error::LengthMismatch {
                    left: t.len(),
                    right: n,
                });
            }
        }
        Ok(Self {
            values,
            feature_names,
            truth,
        })
    }

    /// Builds a dataset with synthesized names `x0, x1, ...`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names, None)
    }

    pub fn with_truth(self, truth: Partition) -> Result<Self> {
        Self::new(self.values, self.feature_names, Some(truth))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn truth(&self) -> Option<&Partition> {
        self.truth.as_ref()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }
}

/// Output of [`standardize`]: the transformed dataset and the indices of
/// constant columns that were mapped to zeros.
#[derive(Debug, Clone, Serialize)]
pub struct Standardized {
    #[serde(skip)]
    pub dataset: Dataset,
    pub constant_columns: Vec<usize>,
}

/// Centers each column and scales it to unit sample standard deviation
/// (`n - 1` denominator). Constant columns become all zeros.
pub fn standardize(d: &Dataset) -> Standardized {
    let n = d.n() as f64;
    let mut values = d.values.clone();
    let mut constant_columns = Vec::new();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if sd <= f64::EPSILON * mean.abs().max(1.0) {
            col.fill(0.0);
            constant_columns.push(j);
        } else {
            col.mapv_inplace(|x| (x - mean) / sd);
        }
    }
    Standardized {
        dataset: Dataset {
            values,
            feature_names: d.feature_names.clone(),
            truth: d.truth.clone(),
        },
        constant_columns,
    }
}

/// Reads a comma-separated file of reals.
///
/// Without a header, features are named `x0, x1, ...`. A named label column
/// is removed from the features and its values (any strings) are mapped to
/// cluster indices in order of first appearance. Parse errors report 1-based
/// data-row and column numbers.
pub fn load_csv(path: &Path, has_header: bool, label_column: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(|e| Error::Csv(e.to_string()))?);
    }
    let width = match (has_header, records.first()) {
        (true, _) => reader.headers().map_err(|e| Error::Csv(e.to_string()))?.len(),
        (false, Some(r)) => r.len(),
        (false, None) => 0,
    };
    let names: Vec<String> = if has_header {
        reader
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect()
    } else {
        (0..width).map(|j| format!("x{j}")).collect()
    };
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let label_idx = match label_column {
        Some(label) => Some(
            names
                .iter()
                .position(|n| n == label)
                .ok_or_else(|| Error::MissingLabelColumn(label.to_owned()))?,
        ),
        None => None,
    };

    let p = width - usize::from(label_idx.is_some());
    let n = records.len();
    let mut values = Array2::zeros((n, p));
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for (i, rec) in records.iter().enumerate() {
        let mut jj = 0;
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                let next = label_ids.len();
                labels.push(*label_ids.entry(cell.to_owned()).or_insert(next));
                continue;
            }
            values[[i, jj]] = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: i + 1,
                col: j + 1,
                value: cell.to_owned(),
            })?;
            jj += 1;
        }
    }
    let feature_names = names
        .into_iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, n)| n)
        .collect();
    let truth = label_idx.map(|_| Partition::new(labels));
    Dataset::new(values, feature_names, truth)
}

/// Formats a real with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the dataset with a header row; truth labels, when present, go in a
/// trailing `truth` column.
pub fn write_csv(d: &Dataset, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    let mut header = d.feature_names.join(",");
    if d.truth.is_some() {
        header.push(',');
        header.push_str(TRUTH_COLUMN);
    }
    writeln!(out, "{header}").map_err(io_err)?;
    for (i, row) in d.values.rows().into_iter().enumerate() {
        let mut line = row.iter().map(|&x| format_real(x)).collect::<Vec<_>>().join(",");
        if let Some(t) = &d.truth {
            line.push(',');
            line.push_str(&t.labels()[i].to_string());
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
