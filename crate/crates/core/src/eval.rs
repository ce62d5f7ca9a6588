//! Metrics, the repeated train/test protocol and rank tables.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{apply_standardizer, fit_standardizer, shuffle_labels, shuffle_split, Dataset};
use crate::error::{Error, Result};
use crate::methods::{train, MethodConfig, MethodKind};
use crate::seed::derive_seed;
use crate::transforms::BRModel;

/// Largest label count the joint-mode enumeration accepts.
pub const MAX_ENUMERATION_LABELS: usize = 12;

/// True and predicted label matrices of equal shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    y_true: Array2<u8>,
    y_pred: Array2<u8>,
}

impl PredictionSet {
    pub fn new(y_true: Array2<u8>, y_pred: Array2<u8>) -> Result<Self> {
        if y_true.dim() != y_pred.dim() {
            return Err(Error::DimensionMismatch {
                expected: y_true.len(),
                got: y_pred.len(),
            });
        }
        if y_true.nrows() == 0 || y_true.ncols() == 0 {
            return Err(Error::EmptyData("prediction set is empty"));
        }
        Ok(PredictionSet { y_true, y_pred })
    }

    pub fn y_true(&self) -> ArrayView2<'_, u8> {
        self.y_true.view()
    }

    pub fn y_pred(&self) -> ArrayView2<'_, u8> {
        self.y_pred.view()
    }
}

/// Fraction of rows whose whole label vector is predicted correctly.
pub fn exact_match(p: &PredictionSet) -> f64 {
    let hits = p
        .y_true
        .rows()
        .into_iter()
        .zip(p.y_pred.rows())
        .filter(|(t, q)| t == q)
        .count();
    hits as f64 / p.y_true.nrows() as f64
}

/// Fraction of individual label bits predicted correctly.
pub fn hamming_score(p: &PredictionSet) -> f64 {
    let hits = p
        .y_true
        .iter()
        .zip(p.y_pred.iter())
        .filter(|(t, q)| t == q)
        .count();
    hits as f64 / p.y_true.len() as f64
}

pub fn exact_match_matrices(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
    Ok(exact_match(&PredictionSet::new(y_true.clone(), y_pred.clone())?))
}

pub fn hamming_score_matrices(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
    Ok(hamming_score(&PredictionSet::new(y_true.clone(), y_pred.clone())?))
}

/// Most probable label vector under independent per-label probabilities,
/// found by enumerating all `2^L` vectors. Exact ties prefer more ones, then
/// ones in earlier positions, matching the per-label rule that sends 0.5 to 1.
pub fn joint_mode(probabilities: &[f64]) -> Result<Vec<u8>> {
    let l = probabilities.len();
    if l > MAX_ENUMERATION_LABELS {
        return Err(Error::TooManyLabels {
            labels: l,
            max: MAX_ENUMERATION_LABELS,
        });
    }
    let mut best: Option<(f64, u32, u32)> = None;
    for v in 0..(1u32 << l) {
        // Bit j of the vector is bit (l - 1 - j) of v, so larger v means
        // ones in earlier positions.
        let mut log_p = 0.0;
        for (j, &p) in probabilities.iter().enumerate() {
            let bit = (v >> (l - 1 - j)) & 1;
            log_p += if bit == 1 { p.ln() } else { (1.0 - p).ln() };
        }
        let ones = v.count_ones();
        let better = match best {
            None => true,
            Some((b, b_ones, b_v)) => {
                log_p > b || (log_p == b && (ones > b_ones || (ones == b_ones && v > b_v)))
            }
        };
        if better {
            best = Some((log_p, ones, v));
        }
    }
    let (_, _, v) = best.expect("at least one vector");
    Ok((0..l).map(|j| ((v >> (l - 1 - j)) & 1) as u8).collect())
}

/// Checks, for every row of `test_x`, that the joint mode of the BR model's
/// factorized distribution equals per-label thresholding at 0.5.
pub fn equivalence_oracle(br_model: &BRModel, test_x: ArrayView2<f64>) -> Result<bool> {
    if br_model.n_labels() > MAX_ENUMERATION_LABELS {
        return Err(Error::TooManyLabels {
            labels: br_model.n_labels(),
            max: MAX_ENUMERATION_LABELS,
        });
    }
    for row in test_x.rows() {
        let probs = br_model.predict_proba(&row.to_vec())?;
        let thresholded: Vec<u8> = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
        if joint_mode(&probs)? != thresholded {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Experiment protocol

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Column heading; defaults to the kind's short name.
    pub label: String,
    pub kind: MethodKind,
    pub config: MethodConfig,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, config: MethodConfig) -> Self {
        MethodSpec {
            label: kind.short_name().to_string(),
            kind,
            config,
        }
    }

    pub fn labelled(label: impl Into<String>, kind: MethodKind, config: MethodConfig) -> Self {
        MethodSpec {
            label: label.into(),
            kind,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedDataset {
    pub name: String,
    pub data: Dataset,
}

impl NamedDataset {
    pub fn new(name: impl Into<String>, data: Dataset) -> Self {
        NamedDataset {
            name: name.into(),
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    ExactMatch,
    Hamming,
}

impl Metric {
    pub fn title(self) -> &'static str {
        match self {
            Metric::ExactMatch => "Exact Match",
            Metric::Hamming => "Hamming Score",
        }
    }
}

/// Seeds the protocol used; see [`run_experiment`] for the derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub iterations: usize,
    pub split_fraction: f64,
    pub master_seed: u64,
}

/// Metrics for one method on one iteration of one dataset. `None` when the
/// method failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub dataset: usize,
    pub iteration: usize,
    pub method: usize,
    pub label_seed: u64,
    pub split_seed: u64,
    pub method_seed: u64,
    pub exact_match: Option<f64>,
    pub hamming: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub dataset: String,
    pub iteration: usize,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: Protocol,
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub runs: Vec<RunCell>,
    pub failures: Vec<Failure>,
}

/// Ranks `values` with 1 = largest; tied values share their average rank.
/// Missing values get no rank.
pub fn average_ranks(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    present.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut ranks = vec![None; values.len()];
    let mut start = 0;
    while start < present.len() {
        let mut end = start + 1;
        while end < present.len() && present[end].1 == present[start].1 {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &(i, _) in &present[start..end] {
            ranks[i] = Some(rank);
        }
        start = end;
    }
    ranks
}

impl ExperimentReport {
    fn value(cell: &RunCell, metric: Metric) -> Option<f64> {
        match metric {
            Metric::ExactMatch => cell.exact_match,
            Metric::Hamming => cell.hamming,
        }
    }

    /// Values of one method on one dataset, in iteration order.
    pub fn values(&self, dataset: usize, method: usize, metric: Metric) -> Vec<Option<f64>> {
        self.runs
            .iter()
            .filter(|c| c.dataset == dataset && c.method == method)
            .map(|c| Self::value(c, metric))
            .collect()
    }

    /// Mean over iterations; `None` if any iteration failed.
    pub fn mean(&self, dataset: usize, method: usize, metric: Metric) -> Option<f64> {
        let values = self.values(dataset, method, metric);
        if values.is_empty() || values.iter().any(Option::is_none) {
            return None;
        }
        Some(values.iter().flatten().sum::<f64>() / values.len() as f64)
    }

    pub fn mean_by_label(&self, dataset: &str, method: &str, metric: Metric) -> Option<f64> {
        let d = self.datasets.iter().position(|n| n == dataset)?;
        let m = self.methods.iter().position(|n| n == method)?;
        self.mean(d, m, metric)
    }

    /// Ranks of the methods on one dataset, from their means.
    pub fn ranks(&self, dataset: usize, metric: Metric) -> Vec<Option<f64>> {
        let means: Vec<Option<f64>> = (0..self.methods.len())
            .map(|m| self.mean(dataset, m, metric))
            .collect();
        average_ranks(&means)
    }

    /// Per-method rank averaged over datasets.
    pub fn average_rank(&self, metric: Metric) -> Vec<Option<f64>> {
        let per_dataset: Vec<Vec<Option<f64>>> =
            (0..self.datasets.len()).map(|d| self.ranks(d, metric)).collect();
        (0..self.methods.len())
            .map(|m| {
                let ranks: Option<Vec<f64>> = per_dataset.iter().map(|r| r[m]).collect();
                ranks.filter(|r| !r.is_empty()).map(|r| r.iter().sum::<f64>() / r.len() as f64)
            })
            .collect()
    }

    /// Dataset rows, one mean and one rank column per method, and a final
    /// average-rank row.
    pub fn to_csv(&self, metric: Metric) -> String {
        let mut out = String::from("dataset");
        for m in &self.methods {
            let _ = write!(out, ",{m},{m} rank");
        }
        out.push('\n');
        for (d, name) in self.datasets.iter().enumerate() {
            out.push_str(&csv_field(name));
            let ranks = self.ranks(d, metric);
            for (m, rank) in ranks.iter().enumerate() {
                let _ = write!(out, ",{},{}", fmt_opt(self.mean(d, m, metric), 6), fmt_opt(*rank, 2));
            }
            out.push('\n');
        }
        out.push_str("avg rank");
        for r in self.average_rank(metric) {
            let _ = write!(out, ",,{}", fmt_opt(r, 2));
        }
        out.push('\n');
        out
    }

    /// Long-format per-iteration results.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("dataset,iteration,method,label_seed,split_seed,method_seed,exact_match,hamming\n");
        for c in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&self.datasets[c.dataset]),
                c.iteration,
                csv_field(&self.methods[c.method]),
                c.label_seed,
                c.split_seed,
                c.method_seed,
                fmt_opt(c.exact_match, 6),
                fmt_opt(c.hamming, 6)
            );
        }
        out
    }

    /// Aligned text table: datasets as rows, methods as columns, each cell
    /// the mean followed by the rank.
    pub fn to_table(&self, metric: Metric) -> String {
        let name_width = self
            .datasets
            .iter()
            .map(String::len)
            .chain(["Dataset".len(), "avg rank".len()])
            .max()
            .unwrap_or(8);
        let col_width = self.methods.iter().map(String::len).max().unwrap_or(0).max(9);
        let mut out = String::new();
        let _ = writeln!(out, "{}", metric.title());
        let _ = write!(out, "{:<name_width$}", "Dataset");
        for m in &self.methods {
            let _ = write!(out, "  {m:>col_width$}");
        }
        out.push('\n');
        let rule = "-".repeat(name_width + self.methods.len() * (col_width + 2));
        let _ = writeln!(out, "{rule}");
        for (d, name) in self.datasets.iter().enumerate() {
            let _ = write!(out, "{name:<name_width$}");
            let ranks = self.ranks(d, metric);
            for (m, rank) in ranks.iter().enumerate() {
                let cell = match (self.mean(d, m, metric), rank) {
                    (Some(v), Some(r)) => format!("{v:.2} {}", fmt_rank(*r)),
                    _ => "NA".to_string(),
                };
                let _ = write!(out, "  {cell:>col_width$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{rule}");
        let _ = write!(out, "{:<name_width$}", "avg rank");
        for r in self.average_rank(metric) {
            let cell = r.map(|r| format!("{r:.2}")).unwrap_or_else(|| "NA".into());
            let _ = write!(out, "  {cell:>col_width$}");
        }
        out.push('\n');
        out
    }

    /// Both tables plus the protocol record and any failures.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "iterations={} split={} master_seed={}",
            self.protocol.iterations, self.protocol.split_fraction, self.protocol.master_seed
        );
        out.push('\n');
        out.push_str(&self.to_table(Metric::ExactMatch));
        out.push('\n');
        out.push_str(&self.to_table(Metric::Hamming));
        if !self.failures.is_empty() {
            out.push_str("\nFailures\n");
            for f in &self.failures {
                let _ = writeln!(out, "{} iteration {} {}: {}", f.dataset, f.iteration, f.method, f.message);
            }
        }
        out
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| format!("{v:.decimals$}")).unwrap_or_else(|| "NA".into())
}

fn fmt_rank(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Stream counters for [`derive_seed`].
const STREAM_LABELS: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_METHOD: u64 = 2;

/// Runs every method on every dataset for `iterations` rounds.
///
/// Round `i` of dataset `d` derives three seeds,
/// `derive_seed(master_seed, &[d, i, s])` for streams `s` = 0 (label
/// order), 1 (instance order) and 2 (method randomness). It then shuffles the
/// label columns, shuffles and splits the rows, standardizes features with
/// training statistics and trains every method on the identical split. All
/// methods in a round share the method seed.
///
/// A method that fails is recorded in [`ExperimentReport::failures`]; errors
/// in the protocol itself abort the run.
pub fn run_experiment(
    datasets: &[NamedDataset],
    methods: &[MethodSpec],
    iterations: usize,
    split_fraction: f64,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods to run".into()));
    }
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (d, named) in datasets.iter().enumerate() {
        for it in 0..iterations {
            let seed_of = |stream| derive_seed(master_seed, &[d as u64, it as u64, stream]);
            let (label_seed, split_seed, method_seed) =
                (seed_of(STREAM_LABELS), seed_of(STREAM_SPLIT), seed_of(STREAM_METHOD));
            let (shuffled, _perm) = shuffle_labels(&named.data, label_seed)?;
            let (train_set, test_set) = shuffle_split(&shuffled, split_fraction, split_seed)?;
            let params = fit_standardizer(&train_set);
            let train_set = apply_standardizer(&params, &train_set)?;
            let test_set = apply_standardizer(&params, &test_set)?;

            for (m, spec) in methods.iter().enumerate() {
                let mut cfg = spec.config.clone();
                cfg.seed = method_seed;
                let outcome = train(spec.kind, &train_set, &cfg)
                    .and_then(|model| model.predict_matrix(test_set.x.view()))
                    .and_then(|pred| PredictionSet::new(test_set.y.clone(), pred));
                let (em, hs) = match outcome {
                    Ok(p) => (Some(exact_match(&p)), Some(hamming_score(&p))),
                    Err(e) => {
                        failures.push(Failure {
                            dataset: named.name.clone(),
                            iteration: it,
                            method: spec.label.clone(),
                            message: e.to_string(),
                        });
                        (None, None)
                    }
                };
                runs.push(RunCell {
                    dataset: d,
                    iteration: it,
                    method: m,
                    label_seed,
                    split_seed,
                    method_seed,
                    exact_match: em,
                    hamming: hs,
                });
            }
        }
    }
    Ok(ExperimentReport {
        protocol: Protocol {
            iterations,
            split_fraction,
            master_seed,
        },
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        methods: methods.iter().map(|m| m.label.clone()).collect(),
        runs,
        failures,
    })
}
