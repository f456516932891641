//! Label-corruption models.
//!
//! A [`TransitionMatrix`] holds `η[j][k] = P(noisy label = k | clean label = j)`.
//! Matrices come from uniform noise, binary class-conditional rates, or the
//! Mahalanobis-similarity generator for multiclass data. [`corrupt`] resamples
//! every label independently from its row.

use crate::impurity::argmax_lowest;
use crate::matrix::FeatureMatrix;
use crate::rng::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise rate {eta} is outside [0, {limit}) for {k} classes")]
    Rate { eta: f64, limit: f64, k: usize },
    #[error("transition matrix must be square with at least two classes")]
    Shape,
    #[error("transition matrix entry ({row}, {col}) = {value} is not a probability")]
    Entry { row: usize, col: usize, value: f64 },
    #[error("transition matrix row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("label {label} at position {index} is outside 0..{n_classes}")]
    LabelOutOfRange { index: usize, label: usize, n_classes: usize },
    #[error("{0}")]
    Requirement(String),
    #[error("pooled covariance of classes {i} and {j} is singular; use a ridge > 0")]
    Singular { i: usize, j: usize },
    #[error("classes {i} and {j} have identical means; Mahalanobis similarity is infinite")]
    CoincidentMeans { i: usize, j: usize },
    #[error("majority class is tied; the majority margin is zero")]
    TiedMajority,
    #[error("bad transition matrix CSV: {0}")]
    Csv(String),
}

/// Row-stochastic `K × K` label transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = NoiseError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows
    }
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, NoiseError> {
        let k = rows.len();
        if k < 2 || rows.iter().any(|r| r.len() != k) {
            return Err(NoiseError::Shape);
        }
        for (row, r) in rows.iter().enumerate() {
            if let Some((col, &value)) = r.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(NoiseError::Entry { row, col, value });
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(NoiseError::RowSum { row, sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n_classes: usize) -> Result<Self, NoiseError> {
        uniform_matrix(n_classes, 0.0)
    }

    pub fn n_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.rows[j][k]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_classes()).map(|j| self.rows[j][j]).collect()
    }

    /// `η[j][j] > η[j][k]` for every row `j` and every `k ≠ j`.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(j, r)| r.iter().enumerate().all(|(k, &v)| k == j || r[j] > v))
    }

    /// One row per line, entries separated by commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, NoiseError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| NoiseError::Csv(format!("line {}: {e}", i + 1)))?;
            rows.push(row);
        }
        Self::new(rows)
    }
}

/// Uniform noise: keep with probability `1 − η`, otherwise move to one of the
/// other `K − 1` classes uniformly.
pub fn uniform_matrix(n_classes: usize, eta: f64) -> Result<TransitionMatrix, NoiseError> {
    if n_classes < 2 {
        return Err(NoiseError::Shape);
    }
    let limit = (n_classes as f64 - 1.0) / n_classes as f64;
    if !(0.0..limit).contains(&eta) {
        return Err(NoiseError::Rate { eta, limit, k: n_classes });
    }
    let off = eta / (n_classes as f64 - 1.0);
    let rows = (0..n_classes)
        .map(|j| (0..n_classes).map(|k| if j == k { 1.0 - eta } else { off }).collect())
        .collect();
    TransitionMatrix::new(rows)
}

/// Binary class-conditional noise. Class 1 is the positive class and flips
/// with probability `rho_pos`; class 0 flips with probability `rho_neg`.
pub fn binary_cc_matrix(rho_pos: f64, rho_neg: f64) -> Result<TransitionMatrix, NoiseError> {
    for rho in [rho_pos, rho_neg] {
        if !(0.0..=1.0).contains(&rho) {
            return Err(NoiseError::Rate { eta: rho, limit: 1.0, k: 2 });
        }
    }
    TransitionMatrix::new(vec![vec![1.0 - rho_neg, rho_neg], vec![rho_pos, 1.0 - rho_pos]])
}

struct ClassMoments {
    count: usize,
    mean: DVector<f64>,
    /// Sum of squared deviations, `(n − 1)·S`.
    scatter: DMatrix<f64>,
}

fn class_moments(features: &FeatureMatrix, labels: &[usize], class: usize) -> ClassMoments {
    let d = features.n_cols();
    let rows: Vec<&[f64]> = labels
        .iter()
        .zip(features.rows())
        .filter(|(&y, _)| y == class)
        .map(|(_, r)| r)
        .collect();
    let count = rows.len();
    let mut mean = DVector::zeros(d);
    for r in &rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= count as f64;
    let mut scatter = DMatrix::zeros(d, d);
    for r in &rows {
        let dev = DVector::from_column_slice(r) - &mean;
        scatter += &dev * dev.transpose();
    }
    ClassMoments { count, mean, scatter }
}

fn mahalanobis(a: &ClassMoments, b: &ClassMoments, ridge: Option<f64>, ij: (usize, usize)) -> Result<f64, NoiseError> {
    let d = a.mean.len();
    let mut pooled = (&a.scatter + &b.scatter) / (a.count + b.count - 2) as f64;
    let ridge = ridge.unwrap_or_else(|| 1e-6 * pooled.trace() / d as f64);
    for i in 0..d {
        pooled[(i, i)] += ridge;
    }
    let chol = pooled.cholesky().ok_or(NoiseError::Singular { i: ij.0, j: ij.1 })?;
    let diff = &a.mean - &b.mean;
    let solved = chol.solve(&diff);
    let dist = diff.dot(&solved).max(0.0).sqrt();
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(NoiseError::CoincidentMeans { i: ij.0, j: ij.1 });
    }
    Ok(dist)
}

/// Class-conditional noise from Mahalanobis similarities between classes.
///
/// Similar classes get larger off-diagonal rates; classes that are close to
/// all others keep their label less often. Diagonals are min-max scaled onto
/// `[0.5, 0.9]`, and each row's remaining mass is split in proportion to the
/// inverse distances. `ridge = None` regularizes each pooled covariance with
/// `1e-6 · trace / d`.
pub fn mahalanobis_matrix(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    ridge: Option<f64>,
) -> Result<TransitionMatrix, NoiseError> {
    if n_classes < 3 {
        return Err(NoiseError::Requirement("Mahalanobis noise needs at least 3 classes".into()));
    }
    if features.n_rows() != labels.len() {
        return Err(NoiseError::Requirement("features and labels differ in length".into()));
    }
    if let Some(r) = ridge {
        if !(r >= 0.0) {
            return Err(NoiseError::Requirement(format!("ridge must be >= 0, got {r}")));
        }
    }
    check_labels(labels, n_classes)?;
    let moments: Vec<ClassMoments> = (0..n_classes).map(|c| class_moments(features, labels, c)).collect();
    if let Some((c, m)) = moments.iter().enumerate().find(|(_, m)| m.count < 2) {
        return Err(NoiseError::Requirement(format!("class {c} has {} samples; need at least 2", m.count)));
    }

    let mut dist = vec![vec![0.0; n_classes]; n_classes];
    for i in 0..n_classes {
        for j in i + 1..n_classes {
            let d = mahalanobis(&moments[i], &moments[j], ridge, (i, j))?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    // s_ii: sum of distances to the other classes
    let raw_diag: Vec<f64> = dist.iter().map(|r| r.iter().sum()).collect();
    let lo = raw_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw_diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let diag: Vec<f64> = raw_diag
        .iter()
        .map(|&s| if hi - lo > 1e-12 * hi { 0.5 + 0.4 * ((s - lo) / (hi - lo)) } else { 0.7 })
        .collect();

    let rows = (0..n_classes)
        .map(|i| {
            let similarity = |j: usize| 1.0 / dist[i][j];
            let total: f64 = (0..n_classes).filter(|&j| j != i).map(similarity).sum();
            (0..n_classes)
                .map(|j| if j == i { diag[i] } else { (1.0 - diag[i]) * similarity(j) / total })
                .collect()
        })
        .collect();
    TransitionMatrix::new(rows)
}

fn check_labels(labels: &[usize], n_classes: usize) -> Result<(), NoiseError> {
    match labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
        Some((index, &label)) => Err(NoiseError::LabelOutOfRange { index, label, n_classes }),
        None => Ok(()),
    }
}

/// Resamples each label from its row of `matrix`; deterministic in `seed`.
pub fn corrupt(labels: &[usize], matrix: &TransitionMatrix, seed: u64) -> Result<Vec<usize>, NoiseError> {
    check_labels(labels, matrix.n_classes())?;
    let mut rng = rng_from_seed(seed);
    Ok(labels
        .iter()
        .map(|&y| {
            let row = matrix.row(y);
            let u: f64 = rng.random();
            let mut cumulative = 0.0;
            for (k, &p) in row.iter().enumerate() {
                cumulative += p;
                if u < cumulative {
                    return k;
                }
            }
            // rounding left u above the final cumulative sum
            row.iter().rposition(|&p| p > 0.0).unwrap_or(y)
        })
        .collect())
}

/// A label-noise setting of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Uniform { eta: f64 },
    BinaryCc { rho_pos: f64, rho_neg: f64 },
    MahalanobisCc {
        #[serde(default)]
        ridge: Option<f64>,
    },
}

impl NoiseSpec {
    /// Transition matrix for a training set with `n_classes` classes.
    pub fn matrix(&self, features: &FeatureMatrix, labels: &[usize], n_classes: usize) -> Result<TransitionMatrix, NoiseError> {
        match *self {
            NoiseSpec::Uniform { eta } => uniform_matrix(n_classes, eta),
            NoiseSpec::BinaryCc { rho_pos, rho_neg } => {
                if n_classes != 2 {
                    return Err(NoiseError::Requirement("binary class-conditional noise needs 2 classes".into()));
                }
                binary_cc_matrix(rho_pos, rho_neg)
            }
            NoiseSpec::MahalanobisCc { ridge } => mahalanobis_matrix(features, labels, n_classes, ridge),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Uniform { eta } => write!(f, "uniform({eta})"),
            NoiseSpec::BinaryCc { rho_pos, rho_neg } => write!(f, "cc({rho_pos};{rho_neg})"),
            NoiseSpec::MahalanobisCc { ridge: None } => write!(f, "mahalanobis"),
            NoiseSpec::MahalanobisCc { ridge: Some(r) } => write!(f, "mahalanobis({r})"),
        }
    }
}

/// Expected noisy class distribution under uniform noise:
/// `(1 − Kη/(K−1))·p + η/(K−1)`.
pub fn noisy_expectation(p: &[f64], eta: f64) -> Vec<f64> {
    let k = p.len() as f64;
    let off = eta / (k - 1.0);
    p.iter().map(|&pj| (1.0 - k * off) * pj + off).collect()
}

fn unique_majority(p: &[f64]) -> Result<usize, NoiseError> {
    let star = argmax_lowest(p);
    if p.iter().enumerate().any(|(k, &v)| k != star && v >= p[star]) {
        return Err(NoiseError::TiedMajority);
    }
    Ok(star)
}

fn check_uniform_rate(k: usize, eta: f64) -> Result<(), NoiseError> {
    let limit = (k as f64 - 1.0) / k as f64;
    if k < 2 || !(0.0..limit).contains(&eta) {
        return Err(NoiseError::Rate { eta, limit, k });
    }
    Ok(())
}

/// Lower bound on the probability that uniform noise at rate `eta` leaves the
/// majority class of `n` clean samples with class distribution `p` in place:
/// `1 − (K−1)·exp(−nγ²/2)`, clamped to `[0, 1]`, where `γ` is the expected
/// noisy margin between the majority and the runner-up.
pub fn hoeffding_bound(p: &[f64], eta: f64, n: u64) -> Result<f64, NoiseError> {
    check_uniform_rate(p.len(), eta)?;
    let star = unique_majority(p)?;
    let expected = noisy_expectation(p, eta);
    let gamma = expected
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != star)
        .map(|(_, &v)| expected[star] - v)
        .fold(f64::INFINITY, f64::min);
    let k = p.len() as f64;
    Ok((1.0 - (k - 1.0) * (-(n as f64) * gamma * gamma / 2.0).exp()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub frequency: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Clean class counts for `n` samples from `p` by largest-remainder rounding.
pub fn realize_counts(p: &[f64], n: u64) -> Vec<u64> {
    let scaled: Vec<f64> = p.iter().map(|&v| v * n as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|v| v.floor() as u64).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - scaled[b].floor()).total_cmp(&(scaled[a] - scaled[a].floor())));
    let short = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle().take(short as usize) {
        counts[i] += 1;
    }
    counts
}

/// Monte Carlo frequency with which uniform noise keeps the clean majority
/// class a (weak) majority. Clean counts come from [`realize_counts`], so `p`
/// should be a multiple of `1/n` for the estimate to match
/// [`hoeffding_bound`]'s setting.
pub fn majority_preservation_mc(
    p: &[f64],
    eta: f64,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, NoiseError> {
    check_uniform_rate(p.len(), eta)?;
    let star = unique_majority(p)?;
    if trials == 0 {
        return Err(NoiseError::Requirement("need at least one trial".into()));
    }
    let k = p.len();
    let clean = realize_counts(p, n);
    let mut rng = rng_from_seed(seed);
    let mut noisy = vec![0u64; k];
    let mut kept = 0u64;
    for _ in 0..trials {
        noisy.iter_mut().for_each(|c| *c = 0);
        for (j, &c) in clean.iter().enumerate() {
            let stay = Binomial::new(c, 1.0 - eta).expect("valid binomial").sample(&mut rng);
            noisy[j] += stay;
            // spread the flipped samples uniformly over the other classes
            let mut remaining = c - stay;
            let mut slots = k - 1;
            for (t, slot) in noisy.iter_mut().enumerate() {
                if t == j || remaining == 0 {
                    continue;
                }
                let take = if slots == 1 {
                    remaining
                } else {
                    Binomial::new(remaining, 1.0 / slots as f64).expect("valid binomial").sample(&mut rng)
                };
                *slot += take;
                remaining -= take;
                slots -= 1;
            }
        }
        if noisy.iter().all(|&c| c <= noisy[star]) {
            kept += 1;
        }
    }
    let frequency = kept as f64 / trials as f64;
    let stderr = (frequency * (1.0 - frequency) / trials as f64).sqrt();
    Ok(MonteCarloEstimate { frequency, stderr, trials })
}
