//! Experiment protocol: dataset ingestion, deterministic splits, λ tuning on
//! a noisy validation shard, and the noise × criterion × replication grid.

use crate::forest::{self, Forest, ForestError, ForestParams};
use crate::impurity::{Criterion, ImpurityError};
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::noise::{self, NoiseError, NoiseSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tree::{self, FitError, ModelError, Tree, TreeParams, TreeStats};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("label column {0} not found")]
    LabelColumn(String),
    #[error("class '{0}' is unknown to the model")]
    UnknownClass(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Impurity(#[from] ImpurityError),
    #[error("criterion {criterion}, noise {noise}, replication {replication}: {source}")]
    Cell { criterion: String, noise: String, replication: usize, source: Box<DataError> },
}

/// Features, class indices and the class names they index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

/// Maps label strings to indices in order of first appearance.
#[derive(Default)]
struct LabelIndexer {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelIndexer {
    fn get(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, DataError> {
        if features.n_rows() != labels.len() {
            return Err(DataError::Config(format!("{} rows but {} labels", features.n_rows(), labels.len())));
        }
        features.check_finite()?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(DataError::Config(format!("label {bad} has no class name")));
        }
        Ok(Self { features, labels, class_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Self {
        Self { features: self.features.clone(), labels, class_names: self.class_names.clone() }
    }

    /// Renames classes through `map` (unmapped names are kept) and re-indexes
    /// by first appearance. Used to binarize multiclass data.
    pub fn remap_labels(&self, map: &BTreeMap<String, String>) -> Self {
        let mut indexer = LabelIndexer::default();
        let labels = self
            .labels
            .iter()
            .map(|&y| {
                let old = &self.class_names[y];
                indexer.get(map.get(old).unwrap_or(old))
            })
            .collect();
        Self { features: self.features.clone(), labels, class_names: indexer.names }
    }

    /// Re-indexes labels to follow `class_names`, e.g. those stored in a model.
    pub fn align_classes(&self, class_names: &[String]) -> Result<Self, DataError> {
        let position: HashMap<&str, usize> =
            class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mapping = self
            .class_names
            .iter()
            .map(|n| position.get(n.as_str()).copied().ok_or_else(|| DataError::UnknownClass(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            features: self.features.clone(),
            labels: self.labels.iter().map(|&y| mapping[y]).collect(),
            class_names: class_names.to_vec(),
        })
    }
}

/// Which CSV column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Column index from a header; `None` selects the last column.
    fn resolve(column: Option<&LabelColumn>, headers: Option<&csv::StringRecord>, width: usize) -> Result<usize, DataError> {
        match column {
            None => width.checked_sub(1).ok_or_else(|| DataError::LabelColumn("last".into())),
            Some(LabelColumn::Index(i)) if *i < width => Ok(*i),
            Some(LabelColumn::Index(i)) => Err(DataError::LabelColumn(i.to_string())),
            Some(LabelColumn::Name(name)) => headers
                .and_then(|h| h.iter().position(|c| c == name))
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < width))
                .ok_or_else(|| DataError::LabelColumn(name.clone())),
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File, DataError> {
    std::fs::File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Reads a CSV file (RFC 4180 quoting). Every column except the label column
/// is a real-valued feature. `label_column = None` uses the last column.
pub fn load_csv(path: &Path, label_column: Option<&LabelColumn>, header: bool) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(header).flexible(true).from_reader(open(path)?);
    let headers = if header {
        Some(reader.headers().map_err(|e| csv_error(&e))?.clone())
    } else {
        None
    };
    let mut label_idx = None;
    let mut width = 0;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut indexer = LabelIndexer::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if label_idx.is_none() {
            width = headers.as_ref().map_or(record.len(), |h| h.len());
            label_idx = Some(LabelColumn::resolve(label_column, headers.as_ref(), width)?);
        }
        if record.len() != width {
            return Err(DataError::Parse { line, message: format!("expected {width} columns, found {}", record.len()) });
        }
        let label_idx = label_idx.expect("set above");
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                labels.push(indexer.get(field.trim()));
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| DataError::Parse {
                line,
                message: format!("column {col}: '{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse { line, message: format!("column {col}: non-finite value") });
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let features = FeatureMatrix::new(labels.len(), width - 1, data)?;
    Dataset::new(features, labels, indexer.names)
}

fn csv_error(e: &csv::Error) -> DataError {
    DataError::Parse { line: e.position().map_or(0, |p| p.line() as usize), message: e.to_string() }
}

/// Reads LIBSVM text: `label idx:val ...` with 1-based ascending indices.
/// Absent indices are 0. The feature count is the largest index seen unless
/// `n_features` is given.
pub fn load_libsvm(path: &Path, n_features: Option<usize>) -> Result<Dataset, DataError> {
    let reader = BufReader::new(open(path)?);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut indexer = LabelIndexer::default();
    let mut max_index = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        let mut row = Vec::new();
        let mut last = 0;
        for token in tokens {
            let err = |message: String| DataError::Parse { line: line_no, message };
            let (idx, val) = token.split_once(':').ok_or_else(|| err(format!("'{token}' is not idx:value")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index '{idx}'")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("bad value '{val}'")))?;
            if idx == 0 || idx <= last {
                return Err(err(format!("indices must be 1-based and ascending, got {idx} after {last}")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value at index {idx}")));
            }
            if n_features.is_some_and(|d| idx > d) {
                return Err(err(format!("index {idx} exceeds {} features", n_features.unwrap_or(0))));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        labels.push(indexer.get(label));
        rows.push(row);
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    let d = n_features.unwrap_or(max_index);
    let mut data = vec![0.0; rows.len() * d];
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            data[r * d + c] = v;
        }
    }
    Dataset::new(FeatureMatrix::new(rows.len(), d, data)?, labels, indexer.names)
}

/// Shuffles rows with `seed` and keeps the first `⌊n·train_fraction⌋` for training.
pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Split(format!("train fraction {train_fraction} is not in (0, 1)")));
    }
    let n = data.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::Split(format!("fraction {train_fraction} of {n} rows leaves an empty side")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    Ok((data.subset(&order[..n_train]), data.subset(&order[n_train..])))
}

/// Learner settings shared by every criterion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree {
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "one")]
        min_samples_leaf: usize,
        #[serde(default)]
        feature_subsample: Option<usize>,
    },
    Forest {
        #[serde(default = "hundred")]
        n_trees: usize,
        #[serde(default = "yes")]
        bootstrap: bool,
        /// Features drawn per split; `ceil(sqrt(d))` when absent.
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "one")]
        min_samples_leaf: usize,
    },
}

fn one() -> usize {
    1
}

fn hundred() -> usize {
    100
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn tree() -> Self {
        ModelSpec::Tree { max_depth: None, min_samples_leaf: 1, feature_subsample: None }
    }

    pub fn forest(n_trees: usize) -> Self {
        ModelSpec::Forest { n_trees, bootstrap: true, max_features: None, max_depth: None, min_samples_leaf: 1 }
    }
}

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Tree { tree: Tree },
    Forest { params: ForestParams, forest: Forest },
}

impl Model {
    pub fn predict_batch(&self, features: &FeatureMatrix) -> Result<Vec<usize>, DataError> {
        Ok(match self {
            Model::Tree { tree } => tree.predict_batch(features)?,
            Model::Forest { forest, .. } => forest.predict_batch(features)?,
        })
    }

    /// Predicted class and class distribution for one row.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>), DataError> {
        Ok(match self {
            Model::Tree { tree } => {
                let (c, d) = tree.predict(x);
                (c, d.to_vec())
            }
            Model::Forest { forest, .. } => forest.predict(x)?,
        })
    }

    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[usize]) -> Result<f64, DataError> {
        Ok(tree::accuracy(&self.predict_batch(features)?, labels))
    }

    pub fn stats(&self) -> TreeStats {
        match self {
            Model::Tree { tree } => tree.stats(),
            Model::Forest { forest, .. } => forest.stats(),
        }
    }
}

/// On-disk model file: the model plus the class names its indices refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub class_names: Vec<String>,
    #[serde(flatten)]
    pub model: Model,
}

pub fn fit_model(spec: &ModelSpec, criterion: Criterion, data: &Dataset, seed: u64) -> Result<Model, DataError> {
    Ok(match *spec {
        ModelSpec::Tree { max_depth, min_samples_leaf, feature_subsample } => {
            let params = TreeParams { criterion, max_depth, min_samples_leaf, feature_subsample, rng_seed: seed };
            Model::Tree { tree: tree::fit(&data.features, &data.labels, data.n_classes(), &params)? }
        }
        ModelSpec::Forest { n_trees, bootstrap, max_features, max_depth, min_samples_leaf } => {
            let tree = TreeParams { criterion, max_depth, min_samples_leaf, feature_subsample: max_features, rng_seed: seed };
            let params = ForestParams { n_trees, tree, bootstrap, rng_seed: seed };
            let forest = forest::fit(&data.features, &data.labels, data.n_classes(), &params)?;
            Model::Forest { params, forest }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best_lambda: f64,
    /// `(λ, validation accuracy)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the NE λ with the best accuracy on a held-out shard of the (noisy)
/// training set. Ties go to the larger λ.
pub fn tune_lambda(
    train: &Dataset,
    grid: &[f64],
    spec: &ModelSpec,
    validation_fraction: f64,
    seed: u64,
) -> Result<TuneResult, DataError> {
    if grid.is_empty() {
        return Err(DataError::Config("λ grid is empty".into()));
    }
    let (fit_shard, validation) = train_test_split(train, 1.0 - validation_fraction, seed)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let model = fit_model(spec, Criterion::Ne { lambda }, &fit_shard, derive_seed(seed, &[1]))?;
        scores.push((lambda, model.accuracy(&validation.features, &validation.labels)?));
    }
    let (best_lambda, _) = scores
        .iter()
        .copied()
        .reduce(|best, cur| if cur.1 > best.1 || (cur.1 == best.1 && cur.0 > best.0) { cur } else { best })
        .expect("grid is non-empty");
    Ok(TuneResult { best_lambda, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub format: DataFormat,
    #[serde(default)]
    pub label_column: Option<LabelColumn>,
    #[serde(default = "yes")]
    pub header: bool,
    #[serde(default)]
    pub n_features: Option<usize>,
    /// Many-to-one renaming of classes applied after loading.
    #[serde(default)]
    pub label_map: Option<BTreeMap<String, String>>,
}

impl DatasetConfig {
    pub fn load(&self) -> Result<Dataset, DataError> {
        let data = match self.format {
            DataFormat::Csv => load_csv(&self.path, self.label_column.as_ref(), self.header)?,
            DataFormat::Libsvm => load_libsvm(&self.path, self.n_features)?,
        };
        Ok(match &self.label_map {
            Some(map) => data.remap_labels(map),
            None => data,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveTag {
    Ane,
}

/// NE with λ chosen per replication on a noisy validation shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveNe {
    pub kind: AdaptiveTag,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CriterionChoice {
    Adaptive(AdaptiveNe),
    Fixed(Criterion),
}

impl CriterionChoice {
    pub fn adaptive() -> Self {
        CriterionChoice::Adaptive(AdaptiveNe { kind: AdaptiveTag::Ane, grid: None })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CriterionChoice::Adaptive(_) => "ane",
            CriterionChoice::Fixed(c) => c.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self { validation_fraction: default_validation_fraction() }
    }
}

fn default_validation_fraction() -> f64 {
    0.2
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_replications() -> usize {
    5
}

/// A full experiment grid, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Seed of the single train/test split shared by all cells.
    #[serde(default)]
    pub split_seed: u64,
    pub noise: Vec<NoiseSpec>,
    pub criteria: Vec<CriterionChoice>,
    pub model: ModelSpec,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Root of the per-replication noise and model seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tuning: TuningConfig,
}

impl ExperimentConfig {
    /// Parses a config file; a relative dataset path is taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| DataError::Config(e.to_string()))?;
        if config.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                config.dataset.path = dir.join(&config.dataset.path);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.replications == 0 {
            return Err(DataError::Config("replications must be at least 1".into()));
        }
        let vf = self.tuning.validation_fraction;
        if !(vf > 0.0 && vf < 1.0) {
            return Err(DataError::Config(format!("validation fraction {vf} is not in (0, 1)")));
        }
        if self.noise.is_empty() || self.criteria.is_empty() {
            return Err(DataError::Config("need at least one noise setting and one criterion".into()));
        }
        for c in &self.criteria {
            match c {
                CriterionChoice::Fixed(c) => c.validate()?,
                CriterionChoice::Adaptive(a) => {
                    for &lambda in a.grid.as_deref().unwrap_or(&DEFAULT_LAMBDA_GRID) {
                        Criterion::Ne { lambda }.validate()?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One trained-and-scored grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub criterion: String,
    pub params: String,
    pub noise: String,
    pub seed: u64,
    pub accuracy: f64,
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    pub seconds: f64,
}

pub const RESULTS_HEADER: [&str; 10] =
    ["dataset", "criterion", "params", "noise", "seed", "accuracy", "nodes", "leaves", "depth", "seconds"];

/// Runs the experiment described by `config`, loading its dataset from disk.
pub fn evaluate(config: &ExperimentConfig) -> Result<Vec<ResultRecord>, DataError> {
    config.validate()?;
    let data = config.dataset.load()?;
    evaluate_on(config, &data)
}

/// Runs every (criterion, noise, replication) cell on an in-memory dataset.
///
/// The test split is shared by all cells. Each replication corrupts the
/// training labels with its own seed; the same corruption is reused across
/// criteria. Records come back sorted by criterion, noise, then replication,
/// in config order.
pub fn evaluate_on(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<ResultRecord>, DataError> {
    config.validate()?;
    let (train, test) = train_test_split(data, config.train_fraction, config.split_seed)?;
    let cells: Vec<(usize, usize, usize)> = (0..config.criteria.len())
        .flat_map(|c| (0..config.noise.len()).flat_map(move |z| (0..config.replications).map(move |r| (c, z, r))))
        .collect();
    cells
        .par_iter()
        .map(|&(c, z, r)| {
            run_cell(config, &train, &test, c, z, r).map_err(|e| DataError::Cell {
                criterion: config.criteria[c].name().to_string(),
                noise: config.noise[z].to_string(),
                replication: r,
                source: Box::new(e),
            })
        })
        .collect()
}

fn run_cell(
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    criterion_idx: usize,
    noise_idx: usize,
    replication: usize,
) -> Result<ResultRecord, DataError> {
    let started = Instant::now();
    let rep_seed = derive_seed(config.seed, &[replication as u64]);
    let spec = &config.noise[noise_idx];
    let matrix = spec.matrix(&train.features, &train.labels, train.n_classes())?;
    let noisy_labels = noise::corrupt(&train.labels, &matrix, derive_seed(rep_seed, &[1, noise_idx as u64]))?;
    let noisy = train.with_labels(noisy_labels);
    let model_seed = derive_seed(rep_seed, &[2]);

    let choice = &config.criteria[criterion_idx];
    let criterion = match choice {
        CriterionChoice::Fixed(c) => *c,
        CriterionChoice::Adaptive(a) => {
            let grid = a.grid.as_deref().unwrap_or(&DEFAULT_LAMBDA_GRID);
            let tuned = tune_lambda(&noisy, grid, &config.model, config.tuning.validation_fraction, derive_seed(rep_seed, &[3]))?;
            Criterion::Ne { lambda: tuned.best_lambda }
        }
    };
    let model = fit_model(&config.model, criterion, &noisy, model_seed)?;
    let accuracy = model.accuracy(&test.features, &test.labels)?;
    let stats = model.stats();
    Ok(ResultRecord {
        dataset: config.dataset.name.clone(),
        criterion: choice.name().to_string(),
        params: criterion.params_label(),
        noise: spec.to_string(),
        seed: rep_seed,
        accuracy,
        nodes: stats.node_count,
        leaves: stats.leaf_count,
        depth: stats.max_depth,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Writes records under [`RESULTS_HEADER`]. Without `timings` the `seconds`
/// column is left empty so that output is reproducible byte for byte.
pub fn write_results_csv<W: Write>(records: &[ResultRecord], out: W, timings: bool) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        let seconds = if timings { format!("{:.6}", r.seconds) } else { String::new() };
        w.write_record([
            r.dataset.clone(),
            r.criterion.clone(),
            r.params.clone(),
            r.noise.clone(),
            r.seed.to_string(),
            r.accuracy.to_string(),
            r.nodes.to_string(),
            r.leaves.to_string(),
            r.depth.to_string(),
            seconds,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean accuracy with a ±2 sample-standard-deviation band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub criterion: String,
    pub noise: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups records by (dataset, criterion, noise) in first-seen order.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, String, String), Vec<f64>)> = Vec::new();
    for r in records {
        let key = (r.dataset.clone(), r.criterion.clone(), r.noise.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.accuracy),
            None => groups.push((key, vec![r.accuracy])),
        }
    }
    groups
        .into_iter()
        .map(|((dataset, criterion, noise), acc)| {
            let (mean, sd) = mean_and_sd(&acc);
            SummaryRow { dataset, criterion, noise, n: acc.len(), mean, sd, lower: mean - 2.0 * sd, upper: mean + 2.0 * sd }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
