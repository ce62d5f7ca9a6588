//! Datasets, CSV I/O, standardization, shuffled splits and the synthetic
//! data generators.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Paired N×D features and N×L binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array2<u8>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array2<u8>) -> Result<Self> {
        let feature_names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        let label_names = (0..y.ncols()).map(|j| format!("y{}", j + 1)).collect();
        Self::with_names(x, y, feature_names, label_names)
    }

    pub fn with_names(
        x: Array2<f64>,
        y: Array2<u8>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyData("dataset has no rows"));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.nrows(),
            });
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: feature_names.len(),
            });
        }
        if label_names.len() != y.ncols() {
            return Err(Error::DimensionMismatch {
                expected: y.ncols(),
                got: label_names.len(),
            });
        }
        if let Some(((row, column), v)) = y.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::NonBinaryLabel {
                row,
                column,
                value: v.to_string(),
            });
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            label_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.y.ncols()
    }

    /// Average number of relevant labels per row.
    pub fn label_cardinality(&self) -> f64 {
        self.y.iter().map(|&v| f64::from(v)).sum::<f64>() / self.n_rows() as f64
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: self.y.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Reorders label columns so that new column `j` is old column
    /// `permutation[j]`.
    pub fn permute_labels(&self, permutation: &[usize]) -> Result<Dataset> {
        check_permutation(permutation, self.n_labels())?;
        Ok(Dataset {
            x: self.x.clone(),
            y: self.y.select(Axis(1), permutation),
            feature_names: self.feature_names.clone(),
            label_names: permutation.iter().map(|&j| self.label_names[j].clone()).collect(),
        })
    }
}

pub(crate) fn check_permutation(order: &[usize], len: usize) -> Result<()> {
    if order.len() != len {
        return Err(Error::InvalidPermutation(format!(
            "expected {len} entries, got {}",
            order.len()
        )));
    }
    let mut seen = vec![false; len];
    for &j in order {
        if j >= len || seen[j] {
            return Err(Error::InvalidPermutation(format!("{order:?} is not a permutation of 0..{len}")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Inverse of a permutation: `inverse[perm[j]] == j`.
pub fn invert_permutation(permutation: &[usize]) -> Vec<usize> {
    let mut inverse = vec![0; permutation.len()];
    for (j, &p) in permutation.iter().enumerate() {
        inverse[p] = j;
    }
    inverse
}

/// Mean that is exact when every value is identical.
pub(crate) fn shifted_mean(values: ArrayView1<f64>) -> f64 {
    let Some(&first) = values.first() else {
        return 0.0;
    };
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Population standard deviation around `mean`.
pub(crate) fn population_std(values: ArrayView1<f64>, mean: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Generators

/// The toy dataset with two binary inputs and the labels (OR, AND, XOR).
/// Inputs cycle through (0,0), (0,1), (1,0), (1,1).
pub fn gen_logical(n: usize) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "logical dataset needs at least 4 rows, got {n}"
        )));
    }
    let mut x = Array2::zeros((n, 2));
    let mut y = Array2::zeros((n, 3));
    for i in 0..n {
        let a = (i >> 1) & 1;
        let b = i & 1;
        x[[i, 0]] = a as f64;
        x[[i, 1]] = b as f64;
        y[[i, 0]] = (a | b) as u8;
        y[[i, 1]] = (a & b) as u8;
        y[[i, 2]] = (a ^ b) as u8;
    }
    Dataset::with_names(
        x,
        y,
        vec!["x1".into(), "x2".into()],
        vec!["OR".into(), "AND".into(), "XOR".into()],
    )
}

/// Parameters of a random generating network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthNetSpec {
    pub d: usize,
    pub l: usize,
    pub n: usize,
    /// Width of the random ReLU layer; 0 gives the linear variant.
    pub hidden_units: usize,
    pub seed: u64,
}

impl SynthNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.l == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "synthetic spec needs positive d, l and n, got d={} l={} n={}",
                self.d, self.l, self.n
            )));
        }
        Ok(())
    }
}

/// The random network that produced a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingNetwork {
    /// hidden_units × D, empty for the linear variant.
    pub hidden_weights: Array2<f64>,
    /// L × (hidden_units or D).
    pub output_weights: Array2<f64>,
    /// One threshold per label.
    pub thresholds: Array1<f64>,
}

impl GeneratingNetwork {
    fn representation(&self, x: &Array2<f64>) -> Array2<f64> {
        if self.hidden_weights.is_empty() {
            x.clone()
        } else {
            x.dot(&self.hidden_weights.t()).mapv(|v| v.max(0.0))
        }
    }

    /// N×L pre-threshold label scores.
    pub fn label_scores(&self, x: &Array2<f64>) -> Array2<f64> {
        self.representation(x).dot(&self.output_weights.t())
    }

    /// Labels: score strictly above the per-label threshold.
    pub fn labels(&self, x: &Array2<f64>) -> Array2<u8> {
        let scores = self.label_scores(x);
        Array2::from_shape_fn(scores.dim(), |(i, j)| u8::from(scores[[i, j]] > self.thresholds[j]))
    }
}

fn median(values: ArrayView1<f64>) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Draws a dataset from a random network and returns the network with it.
///
/// Draw order: features (row-major), hidden weights, output weights.
pub fn gen_synthetic_with_network(spec: &SynthNetSpec) -> Result<(Dataset, GeneratingNetwork)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let x = normal_matrix(&mut rng, spec.n, spec.d);
    let hidden_weights = if spec.hidden_units > 0 {
        normal_matrix(&mut rng, spec.hidden_units, spec.d)
    } else {
        Array2::zeros((0, 0))
    };
    let width = if spec.hidden_units > 0 {
        spec.hidden_units
    } else {
        spec.d
    };
    let output_weights = normal_matrix(&mut rng, spec.l, width);
    let mut network = GeneratingNetwork {
        hidden_weights,
        output_weights,
        thresholds: Array1::zeros(spec.l),
    };
    let scores = network.label_scores(&x);
    network.thresholds = scores.columns().into_iter().map(median).collect();
    let y = network.labels(&x);
    Ok((Dataset::new(x, y)?, network))
}

pub fn gen_synthetic(spec: &SynthNetSpec) -> Result<Dataset> {
    gen_synthetic_with_network(spec).map(|(d, _)| d)
}

// ---------------------------------------------------------------------------
// CSV

/// Reads a comma-separated file with a header row. `label_count` columns are
/// labels, taken from the end of each row when `labels_last` is set and from
/// the start otherwise.
pub fn load_csv(path: impl AsRef<Path>, label_count: usize, labels_last: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_csv(file, label_count, labels_last)
}

pub fn read_csv(reader: impl std::io::Read, label_count: usize, labels_last: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let width = header.len();
    if label_count > width {
        return Err(Error::InvalidConfig(format!(
            "label count {label_count} exceeds column count {width}"
        )));
    }
    let d = width - label_count;
    let (label_cols, feature_cols): (Vec<usize>, Vec<usize>) = if labels_last {
        ((d..width).collect(), (0..d).collect())
    } else {
        ((0..label_count).collect(), (label_count..width).collect())
    };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // Row numbers in errors are 1-based data rows (header excluded).
        let row = i + 1;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row,
                expected: width,
                got: record.len(),
            });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite("CSV features"));
            }
            xs.push(v);
        }
        for &c in &label_cols {
            let cell = record[c].trim();
            let v = match cell.parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(Error::NonBinaryLabel {
                        row,
                        column: c + 1,
                        value: cell.to_string(),
                    })
                }
            };
            ys.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyData("CSV has no data rows"));
    }
    let x = Array2::from_shape_vec((rows, d), xs).expect("row-major feature buffer");
    let y = Array2::from_shape_vec((rows, label_count), ys).expect("row-major label buffer");
    let feature_names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    let label_names = label_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::with_names(x, y, feature_names, label_names)
}

/// Writes features then labels (labels last), with a header row.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset.feature_names.iter().chain(&dataset.label_names))?;
    for (xr, yr) in dataset.x.rows().into_iter().zip(dataset.y.rows()) {
        let record = xr
            .iter()
            .map(|v| format_float(*v))
            .chain(yr.iter().map(|v| v.to_string()));
        w.write_record(record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    write_atomic(path.as_ref(), &buf)
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-feature mean and standard deviation of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-9;

pub fn fit_standardizer(train: &Dataset) -> StandardizationParams {
    let (mean, std) = train
        .x
        .columns()
        .into_iter()
        .map(|col| {
            let m = shifted_mean(col);
            (m, population_std(col, m).max(STD_FLOOR))
        })
        .unzip();
    StandardizationParams { mean, std }
}

impl StandardizationParams {
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for ((mut col, &m), &s) in out.columns_mut().into_iter().zip(&self.mean).zip(&self.std) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

pub fn apply_standardizer(params: &StandardizationParams, dataset: &Dataset) -> Result<Dataset> {
    Ok(Dataset {
        x: params.transform(&dataset.x)?,
        ..dataset.clone()
    })
}

// ---------------------------------------------------------------------------
// Shuffling

/// Shuffles rows and splits off the first `floor(N * train_fraction)` rows
/// as the training set.
pub fn shuffle_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.n_rows();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::EmptyData("split leaves one side empty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    Ok((
        dataset.select_rows(&order[..n_train]),
        dataset.select_rows(&order[n_train..]),
    ))
}

/// Randomly reorders the label columns. Returns the permutation `p` with
/// new column `j` = old column `p[j]`.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..dataset.n_labels()).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    Ok((dataset.permute_labels(&perm)?, perm))
}
