//! Command-line front end: `train`, `predict`, `noise`, `tune`, `bench` and
//! `verify`.
//!
//! Every successful command prints exactly one JSON status line on stdout.
//! Usage errors exit with 2, data and runtime errors with 1.

pub mod verify;

use crate::dataeng::{
    self, DataError, Dataset, ExperimentConfig, LabelColumn, Model, ModelFile, ModelSpec,
};
use crate::impurity::Criterion;
use crate::noise::{self, NoiseSpec};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Environment variable capping the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "ROBUST_TREES_THREADS";

#[derive(Debug, Parser)]
#[command(name = "robust-trees", version, about = "Noise-robust decision trees and random forests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tree or forest and save it as JSON.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Corrupt the labels of a dataset.
    Noise(NoiseArgs),
    /// Choose the NE λ on a held-out validation shard.
    Tune(TuneArgs),
    /// Run an experiment grid from a JSON config.
    Bench(BenchArgs),
    /// Check closed forms and bounds against brute-force references.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// File format; inferred from the extension when omitted (.csv, else LIBSVM).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// CSV label column, by header name or 0-based index (default: last column).
    #[arg(long)]
    pub label_column: Option<String>,
    /// The CSV file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// LIBSVM feature count (default: largest index present).
    #[arg(long)]
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Libsvm,
}

impl DataArgs {
    pub fn load(&self) -> Result<Dataset, DataError> {
        let format = self.format.unwrap_or_else(|| {
            if self.data.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                Format::Csv
            } else {
                Format::Libsvm
            }
        });
        match format {
            Format::Csv => {
                let column = self.label_column.as_deref().map(|s| match s.parse() {
                    Ok(i) => LabelColumn::Index(i),
                    Err(_) => LabelColumn::Name(s.to_string()),
                });
                dataeng::load_csv(&self.data, column.as_ref(), !self.no_header)
            }
            Format::Libsvm => dataeng::load_libsvm(&self.data, self.n_features),
        }
    }
}

#[derive(Debug, Args)]
pub struct CriterionArgs {
    /// gini, entropy, misclassification, mae, gce, ne or twoing.
    #[arg(long, default_value = "gini")]
    pub criterion: String,
    /// NE parameter λ ∈ [0, 1] (required for `ne`).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// GCE exponent q ≥ 0 (required for `gce`).
    #[arg(long)]
    pub q: Option<f64>,
}

impl CriterionArgs {
    fn criterion(&self) -> Result<Criterion, CliError> {
        Criterion::from_name(&self.criterion, self.lambda, self.q).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Train a random forest.
    #[arg(long, conflicts_with = "tree")]
    pub forest: bool,
    /// Train a single tree (the default).
    #[arg(long)]
    pub tree: bool,
    /// Number of trees in a forest.
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    /// Features drawn per split (forest default: ceil(sqrt(d)); tree default: all).
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Grow forest trees on the full sample instead of bootstrap resamples.
    #[arg(long)]
    pub no_bootstrap: bool,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        if self.forest {
            ModelSpec::Forest {
                n_trees: self.trees,
                bootstrap: !self.no_bootstrap,
                max_features: self.max_features,
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
            }
        } else {
            ModelSpec::Tree {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                feature_subsample: self.max_features,
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub criterion: CriterionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Optional CSV of predicted classes and class probabilities.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NoiseKind {
    Uniform,
    Cc,
    Mahalanobis,
}

#[derive(Debug, Args)]
pub struct NoiseFlags {
    /// Noise model.
    #[arg(long = "noise", value_enum, default_value = "uniform")]
    pub kind: NoiseKind,
    /// Uniform noise rate.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Binary class-conditional flip rate of the positive (second) class.
    #[arg(long)]
    pub rho_pos: Option<f64>,
    /// Binary class-conditional flip rate of the negative (first) class.
    #[arg(long)]
    pub rho_neg: Option<f64>,
    /// Covariance ridge for Mahalanobis noise.
    #[arg(long)]
    pub ridge: Option<f64>,
}

impl NoiseFlags {
    fn spec(&self) -> Result<Option<NoiseSpec>, CliError> {
        let missing = |flag: &str, kind: &str| CliError::Usage(format!("--noise {kind} requires --{flag}"));
        Ok(match self.kind {
            NoiseKind::Uniform => self.eta.map(|eta| NoiseSpec::Uniform { eta }),
            NoiseKind::Cc => Some(NoiseSpec::BinaryCc {
                rho_pos: self.rho_pos.ok_or_else(|| missing("rho-pos", "cc"))?,
                rho_neg: self.rho_neg.ok_or_else(|| missing("rho-neg", "cc"))?,
            }),
            NoiseKind::Mahalanobis => Some(NoiseSpec::MahalanobisCc { ridge: self.ridge }),
        })
    }
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub noise: NoiseFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noisy dataset as CSV (features then a `label` column).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of the transition matrix used.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Label noise applied to the data before tuning (none by default).
    #[command(flatten)]
    pub noise: NoiseFlags,
    /// Comma-separated λ candidates.
    #[arg(long, value_delimiter = ',', default_values_t = dataeng::DEFAULT_LAMBDA_GRID)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Per-cell results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregated summary CSV (default: `summary.csv` next to --out).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Fill the `seconds` column with wall-clock times (output is then no
    /// longer reproducible byte for byte).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: verify::Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb the closed forms by this amount (negative control).
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub inject_fault: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    DataError::Io { path: path.to_path_buf(), source }.into()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn csv_failure(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        other => CliError::Failed(format!("{}: {other:?}", path.display())),
    }
}

/// Applies `ROBUST_TREES_THREADS` to the global rayon pool.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize =
        value.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a count, got '{value}'")))?;
    // an already-initialized pool (e.g. a second call in one process) is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let mut stdout = std::io::stdout().lock();
    match configure_threads().and_then(|()| execute(cli.command)) {
        Ok(status) => {
            let _ = writeln!(stdout, "{status}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run with --help for usage");
            }
            e.exit_code()
        }
    }
}

/// Runs one command and returns its JSON status line.
pub fn execute(command: Command) -> Result<serde_json::Value, CliError> {
    match command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Noise(a) => noise_cmd(a),
        Command::Tune(a) => tune(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify_cmd(a),
    }
}

fn train(a: TrainArgs) -> Result<serde_json::Value, CliError> {
    let criterion = a.criterion.criterion()?;
    let spec = a.model.spec();
    let data = a.data.load()?;
    let model = dataeng::fit_model(&spec, criterion, &data, a.seed)?;
    let accuracy = model.accuracy(&data.features, &data.labels)?;
    let stats = model.stats();
    let kind = match model {
        Model::Tree { .. } => "tree",
        Model::Forest { .. } => "forest",
    };
    let file = ModelFile { class_names: data.class_names.clone(), model };
    let mut out = create(&a.out)?;
    serde_json::to_writer(&mut out, &file).map_err(|e| CliError::Failed(e.to_string()))?;
    out.write_all(b"\n").and_then(|()| out.flush()).map_err(|e| io_error(&a.out, e))?;
    Ok(json!({
        "command": "train",
        "status": "ok",
        "model": kind,
        "criterion": criterion.to_string(),
        "nodes": stats.node_count,
        "leaves": stats.leaf_count,
        "depth": stats.max_depth,
        "train_accuracy": accuracy,
        "out": a.out,
    }))
}

pub fn read_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Failed(format!("{}: malformed model: {e}", path.display())))
}

fn predict(a: PredictArgs) -> Result<serde_json::Value, CliError> {
    let file = read_model(&a.model)?;
    let data = a.data.load()?;
    // labels of unknown classes only disable the accuracy report
    let aligned = data.align_classes(&file.class_names).ok();
    let predicted = file.model.predict_batch(&data.features)?;
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_writer(create(path)?);
        let mut header = vec!["row".to_string(), "predicted".to_string()];
        header.extend(file.class_names.iter().map(|c| format!("p_{c}")));
        w.write_record(&header).map_err(|e| csv_failure(path, e))?;
        for (i, x) in data.features.rows().enumerate() {
            let (class, dist) = file.model.predict(x)?;
            let mut record = vec![i.to_string(), file.class_names[class].clone()];
            record.extend(dist.iter().map(f64::to_string));
            w.write_record(&record).map_err(|e| csv_failure(path, e))?;
        }
        w.flush().map_err(|e| io_error(path, e))?;
    }
    let accuracy = aligned.map(|d| crate::tree::accuracy(&predicted, &d.labels));
    Ok(json!({
        "command": "predict",
        "status": "ok",
        "rows": predicted.len(),
        "accuracy": accuracy,
        "out": a.out,
    }))
}

fn noise_cmd(a: NoiseArgs) -> Result<serde_json::Value, CliError> {
    let spec = a
        .noise
        .spec()?
        .ok_or_else(|| CliError::Usage("--noise uniform requires --eta".into()))?;
    let data = a.data.load()?;
    let matrix = spec.matrix(&data.features, &data.labels, data.n_classes()).map_err(DataError::from)?;
    let noisy = noise::corrupt(&data.labels, &matrix, a.seed).map_err(DataError::from)?;
    let flipped = data.labels.iter().zip(&noisy).filter(|(a, b)| a != b).count();

    let mut w = csv::Writer::from_writer(create(&a.out)?);
    let mut header: Vec<String> = (0..data.n_features()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| csv_failure(&a.out, e))?;
    for (x, &y) in data.features.rows().zip(&noisy) {
        let mut record: Vec<String> = x.iter().map(f64::to_string).collect();
        record.push(data.class_names[y].clone());
        w.write_record(&record).map_err(|e| csv_failure(&a.out, e))?;
    }
    w.flush().map_err(|e| io_error(&a.out, e))?;
    if let Some(path) = &a.matrix_out {
        std::fs::write(path, matrix.to_csv()).map_err(|e| io_error(path, e))?;
    }
    Ok(json!({
        "command": "noise",
        "status": "ok",
        "noise": spec.to_string(),
        "rows": noisy.len(),
        "flipped": flipped,
        "matrix": matrix,
        "out": a.out,
    }))
}

fn tune(a: TuneArgs) -> Result<serde_json::Value, CliError> {
    for &lambda in &a.grid {
        Criterion::Ne { lambda }.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let noise = a.noise.spec()?;
    let data = a.data.load()?;
    let data = match noise {
        Some(spec) => {
            let m = spec.matrix(&data.features, &data.labels, data.n_classes()).map_err(DataError::from)?;
            data.with_labels(noise::corrupt(&data.labels, &m, a.seed).map_err(DataError::from)?)
        }
        None => data,
    };
    let result = dataeng::tune_lambda(&data, &a.grid, &a.model.spec(), a.validation_fraction, a.seed)?;
    Ok(json!({
        "command": "tune",
        "status": "ok",
        "noise": noise.map(|n| n.to_string()),
        "best_lambda": result.best_lambda,
        "scores": result.scores,
    }))
}

fn bench(a: BenchArgs) -> Result<serde_json::Value, CliError> {
    let config = ExperimentConfig::from_file(&a.config)?;
    let records = dataeng::evaluate(&config)?;
    let summary = dataeng::summarize(&records);
    let summary_path = a
        .summary
        .clone()
        .unwrap_or_else(|| a.out.parent().unwrap_or(Path::new("")).join("summary.csv"));
    dataeng::write_results_csv(&records, create(&a.out)?, a.timings).map_err(|e| csv_failure(&a.out, e))?;
    dataeng::write_summary_csv(&summary, create(&summary_path)?).map_err(|e| csv_failure(&summary_path, e))?;
    Ok(json!({
        "command": "bench",
        "status": "ok",
        "dataset": config.dataset.name,
        "rows": records.len(),
        "cells": summary.len(),
        "out": a.out,
        "summary": summary_path,
    }))
}

fn verify_cmd(a: VerifyArgs) -> Result<serde_json::Value, CliError> {
    let checks = verify::run(a.suite, a.seed, verify::Fault(a.inject_fault))
        .map_err(|e| CliError::Failed(format!("{} suite could not run: {e}", a.suite)))?;
    let mut err = std::io::stderr().lock();
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(err, "{verdict}  {:width$}  {:>5} cases  {}", c.name, c.cases, c.detail);
        for f in c.failures.iter().take(10) {
            let _ = writeln!(err, "      failing case: {f}");
        }
        if c.failures.len() > 10 {
            let _ = writeln!(err, "      ... {} more", c.failures.len() - 10);
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::Failed(format!("{} suite: {} check(s) failed: {}", a.suite, failed.len(), failed.join(", "))));
    }
    Ok(json!({
        "command": "verify",
        "status": "ok",
        "suite": a.suite.to_string(),
        "seed": a.seed,
        "checks": checks.len(),
        "cases": checks.iter().map(|c| c.cases).sum::<usize>(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("robust-trees").chain(args.iter().copied()))
    }

    #[test]
    fn ne_without_lambda_is_a_usage_error() {
        let Command::Train(a) = parse(&["train", "--data", "x.csv", "--criterion", "ne", "--out", "m.json"]).unwrap().command
        else {
            panic!("expected train")
        };
        assert_eq!(a.criterion.criterion().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn forest_and_tree_conflict() {
        assert!(parse(&["train", "--data", "x", "--out", "m", "--forest", "--tree"]).is_err());
    }

    #[test]
    fn tune_grid_parses_commas() {
        let Command::Tune(a) = parse(&["tune", "--data", "x", "--grid", "0.1,0.9"]).unwrap().command else {
            panic!("expected tune")
        };
        assert_eq!(a.grid, vec![0.1, 0.9]);
    }
}
