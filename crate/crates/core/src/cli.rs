//! Command-line front end: `gen`, `bench`, `train` and `predict`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_standardizer, fit_standardizer, gen_logical, gen_synthetic, load_csv, read_csv,
    write_atomic, write_csv, Dataset, StandardizationParams, SynthNetSpec,
};
use crate::error::{Error, Result};
use crate::eval::{run_experiment, ExperimentReport, Metric, MethodSpec, NamedDataset};
use crate::methods::{train, MethodConfig, MethodKind, MultiLabelModel};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_LOGICAL_ROWS: usize = 20;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mlchain", version, about = "Multi-label chains with synthetic labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset as CSV with a JSON manifest next to it.
    Gen(GenArgs),
    /// Run the repeated train/test benchmark and write report files.
    Bench(BenchArgs),
    /// Train one method on a whole dataset and save it as JSON.
    Train(TrainArgs),
    /// Predict labels for a CSV with a saved model.
    Predict(PredictArgs),
}

/// Parameters shared by every command that trains models.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// Synthetic labels in the feature space (default L, 2L for elm).
    #[arg(long)]
    pub h: Option<usize>,
    /// Meta-labels in the label space for ccasl+aml (default 2L).
    #[arg(long = "hprime")]
    pub h_prime: Option<usize>,
    /// Labels per meta-label subset.
    #[arg(long = "subset-size", default_value_t = 3)]
    pub subset_size: usize,
    /// Gradient descent epochs.
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long = "learning-rate", default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

impl MethodArgs {
    pub fn config(&self, seed: u64) -> MethodConfig {
        let mut cfg = MethodConfig {
            h: self.h,
            h_prime: self.h_prime,
            subset_size: self.subset_size,
            seed,
            ..MethodConfig::default()
        };
        cfg.base.epochs = self.epochs;
        cfg.base.learning_rate = self.learning_rate;
        cfg.base.l2_penalty = self.l2;
        cfg.base.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// `logical[:N]` or `synth:d=..,l=..,n=..,hidden=..[,seed=..]`.
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV path; the manifest goes to the same path with `.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Dataset source, repeatable: `logical[:N]`, a synth spec, or a CSV path.
    #[arg(long, required = true)]
    pub dataset: Vec<String>,
    /// Number of label columns (at the end of each row) for CSV sources.
    #[arg(long)]
    pub labels: Option<usize>,
    /// Comma-separated methods: br,cc,ccasl,ccasl+br,ccasl+aml,elm.
    #[arg(long, default_value = "br,cc,ccasl,ccasl+br,ccasl+aml,elm")]
    pub methods: String,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    /// Training fraction of each split.
    #[arg(long, default_value_t = 0.6)]
    pub split: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Output directory for report files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Prefix of the report file names.
    #[arg(long, default_value = "bench")]
    pub name: String,
    /// Also write per-iteration results to `{name}-runs.csv`.
    #[arg(long)]
    pub runs: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub labels: Option<usize>,
    /// One of br,cc,ccasl,ccasl+br,ccasl+aml,elm.
    #[arg(long, default_value = "ccasl+aml")]
    pub method: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub params: MethodArgs,
    /// Output model JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with a header and D feature columns, optionally followed by L
    /// label columns which are ignored.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parsed `--dataset` value.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Logical { n: usize },
    Synthetic(SynthNetSpec),
    Csv(PathBuf),
}

impl DataSource {
    /// `seed` fills in a synthetic spec that names none.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        if s == "logical" {
            return Ok(DataSource::Logical {
                n: DEFAULT_LOGICAL_ROWS,
            });
        }
        if let Some(n) = s.strip_prefix("logical:") {
            let n = n
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad row count in {s:?}")))?;
            return Ok(DataSource::Logical { n });
        }
        if let Some(params) = s.strip_prefix("synth:") {
            return parse_synth(params, seed).map(DataSource::Synthetic);
        }
        if s == "synth" {
            return Err(Error::InvalidConfig(
                "synth needs parameters, e.g. synth:d=10,l=10,n=2000,hidden=100".into(),
            ));
        }
        Ok(DataSource::Csv(PathBuf::from(s)))
    }

    pub fn name(&self) -> String {
        match self {
            DataSource::Logical { .. } => "Logical".into(),
            DataSource::Synthetic(spec) => format!(
                "synth-d{}-l{}-n{}-h{}-s{}",
                spec.d, spec.l, spec.n, spec.hidden_units, spec.seed
            ),
            DataSource::Csv(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    pub fn load(&self, labels: Option<usize>) -> Result<Dataset> {
        match self {
            DataSource::Logical { n } => gen_logical(*n),
            DataSource::Synthetic(spec) => gen_synthetic(spec),
            DataSource::Csv(path) => {
                let labels = labels.ok_or_else(|| {
                    Error::InvalidConfig("--labels is required for CSV datasets".into())
                })?;
                load_csv(path, labels, true)
            }
        }
    }
}

fn parse_synth(params: &str, seed: u64) -> Result<SynthNetSpec> {
    let mut spec = SynthNetSpec {
        d: 0,
        l: 0,
        n: 0,
        hidden_units: 0,
        seed,
    };
    let (mut has_d, mut has_l, mut has_n) = (false, false, false);
    for part in params.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {part:?}")))?;
        let bad = || Error::InvalidConfig(format!("bad value for {key}: {value:?}"));
        match key.trim() {
            "d" => {
                spec.d = value.parse().map_err(|_| bad())?;
                has_d = true;
            }
            "l" => {
                spec.l = value.parse().map_err(|_| bad())?;
                has_l = true;
            }
            "n" => {
                spec.n = value.parse().map_err(|_| bad())?;
                has_n = true;
            }
            "hidden" => spec.hidden_units = value.parse().map_err(|_| bad())?,
            "seed" => spec.seed = value.parse().map_err(|_| bad())?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown synth parameter {other:?}; expected d, l, n, hidden, seed"
                )))
            }
        }
    }
    if !(has_d && has_l && has_n) {
        return Err(Error::InvalidConfig("synth needs d, l and n".into()));
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_methods(list: &str) -> Result<Vec<MethodKind>> {
    let kinds = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<MethodKind>>>()?;
    if kinds.is_empty() {
        return Err(Error::InvalidConfig("no methods given".into()));
    }
    Ok(kinds)
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub source: String,
    pub kind: String,
    pub seed: Option<u64>,
    pub synth: Option<SynthNetSpec>,
    pub rows: usize,
    pub features: usize,
    pub labels: usize,
    pub label_cardinality: f64,
}

/// Writes the dataset CSV and returns the manifest path.
pub fn cmd_gen(args: &GenArgs) -> Result<PathBuf> {
    let source = DataSource::parse(&args.dataset, args.seed)?;
    let (kind, seed, synth) = match &source {
        DataSource::Logical { .. } => ("logical", None, None),
        DataSource::Synthetic(spec) => ("synth", Some(spec.seed), Some(*spec)),
        DataSource::Csv(_) => {
            return Err(Error::InvalidConfig(format!(
                "unknown generator {:?}; expected logical[:N] or synth:...",
                args.dataset
            )))
        }
    };
    let dataset = source.load(None)?;
    let mut csv = Vec::new();
    write_csv(&dataset, &mut csv)?;
    write_atomic(&args.out, &csv)?;

    let manifest = GenManifest {
        source: args.dataset.clone(),
        kind: kind.into(),
        seed,
        synth,
        rows: dataset.n_rows(),
        features: dataset.n_features(),
        labels: dataset.n_labels(),
        label_cardinality: dataset.label_cardinality(),
    };
    let manifest_path = args.out.with_extension("json");
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest_path)
}

/// Paths written by [`cmd_bench`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub exact_match_csv: PathBuf,
    pub hamming_csv: PathBuf,
    pub report_txt: PathBuf,
    pub runs_csv: Option<PathBuf>,
}

pub fn bench_report(args: &BenchArgs) -> Result<ExperimentReport> {
    let kinds = parse_methods(&args.methods)?;
    let cfg = args.method.config(args.seed);
    let methods: Vec<MethodSpec> = kinds.into_iter().map(|k| MethodSpec::new(k, cfg.clone())).collect();
    let datasets = args
        .dataset
        .iter()
        .map(|s| {
            let source = DataSource::parse(s, args.seed)?;
            Ok(NamedDataset::new(source.name(), source.load(args.labels)?))
        })
        .collect::<Result<Vec<_>>>()?;
    run_experiment(&datasets, &methods, args.iters, args.split, args.seed)
}

/// Runs the benchmark and writes the report files. Method failures are part
/// of the returned report; the caller decides the exit status.
pub fn cmd_bench(args: &BenchArgs) -> Result<(ExperimentReport, BenchOutput)> {
    let report = bench_report(args)?;
    std::fs::create_dir_all(&args.out)?;
    let path = |suffix: &str| args.out.join(format!("{}-{suffix}", args.name));
    let output = BenchOutput {
        exact_match_csv: path("exactmatch.csv"),
        hamming_csv: path("hamming.csv"),
        report_txt: path("report.txt"),
        runs_csv: args.runs.then(|| path("runs.csv")),
    };
    write_atomic(&output.exact_match_csv, report.to_csv(Metric::ExactMatch).as_bytes())?;
    write_atomic(&output.hamming_csv, report.to_csv(Metric::Hamming).as_bytes())?;
    write_atomic(&output.report_txt, report.to_text().as_bytes())?;
    if let Some(runs) = &output.runs_csv {
        write_atomic(runs, report.runs_csv().as_bytes())?;
    }
    Ok((report, output))
}

/// Everything `predict` needs: the training standardizer, the model and the
/// column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub standardizer: StandardizationParams,
    pub model: MultiLabelModel,
}

impl SavedModel {
    /// Predicts from raw (unstandardized) features.
    pub fn predict_matrix(&self, x: &Array2<f64>) -> Result<Array2<u8>> {
        let z = self.standardizer.transform(x)?;
        self.model.predict_matrix(z.view())
    }
}

pub fn train_saved(args: &TrainArgs) -> Result<SavedModel> {
    let kind: MethodKind = args.method.parse()?;
    let source = DataSource::parse(&args.dataset, args.seed)?;
    let dataset = source.load(args.labels)?;
    let standardizer = fit_standardizer(&dataset);
    let scaled = apply_standardizer(&standardizer, &dataset)?;
    let model = train(kind, &scaled, &args.params.config(args.seed))?;
    Ok(SavedModel {
        feature_names: dataset.feature_names,
        label_names: dataset.label_names,
        standardizer,
        model,
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<SavedModel> {
    let saved = train_saved(args)?;
    write_atomic(&args.out, serde_json::to_string(&saved)?.as_bytes())?;
    Ok(saved)
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a prediction input with either D or D+L columns.
pub fn load_prediction_input(path: &Path, saved: &SavedModel) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let width = csv::Reader::from_reader(bytes.as_slice()).headers()?.len();
    let d = saved.feature_names.len();
    let l = saved.label_names.len();
    if width != d && width != d + l {
        return Err(Error::DimensionMismatch { expected: d, got: width });
    }
    Ok(read_csv(bytes.as_slice(), width - d, true)?.x)
}

pub fn write_predictions(labels: &[String], y: &Array2<u8>, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(labels)?;
    for row in y.rows() {
        w.write_record(row.iter().map(u8::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<Array2<u8>> {
    let saved = load_model(&args.model)?;
    let x = load_prediction_input(&args.data, &saved)?;
    let y = saved.predict_matrix(&x)?;
    let mut buf = Vec::new();
    write_predictions(&saved.label_names, &y, &mut buf)?;
    match &args.out {
        Some(path) => write_atomic(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(y)
}

// ---------------------------------------------------------------------------
// Entry point

pub fn exit_code(err: &Error) -> i32 {
    if err.is_data_error() {
        EXIT_DATA
    } else {
        match err {
            Error::InvalidConfig(_) | Error::InvalidPermutation(_) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Gen(args) => {
            let manifest = cmd_gen(args)?;
            println!("wrote {} and {}", args.out.display(), manifest.display());
            Ok(EXIT_OK)
        }
        Command::Bench(args) => {
            let (report, output) = cmd_bench(args)?;
            print!("{}", report.to_text());
            println!(
                "wrote {}, {} and {}",
                output.exact_match_csv.display(),
                output.hamming_csv.display(),
                output.report_txt.display()
            );
            if report.failures.is_empty() {
                Ok(EXIT_OK)
            } else {
                for f in &report.failures {
                    eprintln!(
                        "error: {} on {} (iteration {}): {}",
                        f.method, f.dataset, f.iteration, f.message
                    );
                }
                Ok(EXIT_INTERNAL)
            }
        }
        Command::Train(args) => {
            let saved = cmd_train(args)?;
            println!(
                "wrote {} ({}, D={}, L={})",
                args.out.display(),
                saved.model.kind().short_name(),
                saved.feature_names.len(),
                saved.label_names.len()
            );
            Ok(EXIT_OK)
        }
        Command::Predict(args) => {
            cmd_predict(args)?;
            Ok(EXIT_OK)
        }
    }
}
