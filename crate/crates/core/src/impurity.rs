//! Node impurities as minimum partial empirical risks.
//!
//! For a node `S` of a dataset `D`, the impurity of a loss is the smallest
//! risk `Σ_{(x,y)∈S} ℓ(ŷ, y) / |D|` achievable by a constant prediction `ŷ`.
//! Every criterion here has a closed form in the empirical class
//! distribution `p` of the node, scaled by the node weight `W_S = |S|/|D|`.
//! Greedy tree growth maximizes the drop in this quantity.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImpurityError {
    #[error("a class histogram needs at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("impurity is undefined for an empty node")]
    Empty,
    #[error("invalid criterion parameter: {0}")]
    Parameter(String),
    #[error("node holds {total} samples but the dataset size is {dataset_size}")]
    DatasetSize { total: u64, dataset_size: u64 },
    #[error("histograms disagree on the number of classes ({0} vs {1})")]
    ClassMismatch(usize, usize),
    #[error("child histograms do not partition the parent histogram")]
    NotAPartition,
}

/// Per-class sample counts at a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl ClassHistogram {
    pub fn new(counts: Vec<u64>) -> Result<Self, ImpurityError> {
        if counts.len() < 2 {
            return Err(ImpurityError::TooFewClasses(counts.len()));
        }
        let total = counts.iter().sum();
        Ok(Self { counts, total })
    }

    pub fn zeros(n_classes: usize) -> Result<Self, ImpurityError> {
        Self::new(vec![0; n_classes])
    }

    /// Histogram of class labels; labels must lie in `0..n_classes`.
    pub fn from_labels(labels: &[usize], n_classes: usize) -> Result<Self, ImpurityError> {
        let mut hist = Self::zeros(n_classes)?;
        for &y in labels {
            hist.add(y);
        }
        Ok(hist)
    }

    pub fn add(&mut self, class: usize) {
        self.counts[class] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// `true` when at most one class has a nonzero count.
    pub fn is_pure(&self) -> bool {
        self.counts.iter().filter(|&&c| c > 0).count() <= 1
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Majority class; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.counts)
    }

    /// Empirical class distribution, `None` for an empty node.
    pub fn probabilities(&self) -> Option<Vec<f64>> {
        (self.total > 0).then(|| probabilities(&self.counts, self.total))
    }

    /// Element-wise sum; both histograms must have the same class count.
    pub fn merged(&self, other: &Self) -> Result<Self, ImpurityError> {
        self.check_classes(other)?;
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Self::new(counts)
    }

    fn check_classes(&self, other: &Self) -> Result<(), ImpurityError> {
        if self.n_classes() != other.n_classes() {
            return Err(ImpurityError::ClassMismatch(self.n_classes(), other.n_classes()));
        }
        Ok(())
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn probabilities(counts: &[u64], total: u64) -> Vec<f64> {
    let t = total as f64;
    counts.iter().map(|&c| c as f64 / t).collect()
}

/// A split criterion and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    /// MSE loss: `1 − ‖p‖₂²`.
    Gini,
    /// Cross-entropy loss: `−pᵀ ln p`.
    Entropy,
    /// 01 loss: `1 − ‖p‖∞`.
    Misclassification,
    /// MAE loss: `2(1 − ‖p‖∞)`.
    Mae,
    /// Generalized cross entropy with exponent `q ≥ 0`.
    Gce { q: f64 },
    /// Negative exponential loss with `λ ∈ [0, 1]`; `λ = 0` is the small-λ limit.
    Ne { lambda: f64 },
    /// CART twoing rule. Not a loss: splits are ranked by the twoing score and
    /// node impurity is reported as Gini.
    Twoing,
}

impl Criterion {
    pub fn validate(&self) -> Result<(), ImpurityError> {
        match *self {
            Criterion::Gce { q } if !(q >= 0.0 && q.is_finite()) => {
                Err(ImpurityError::Parameter(format!("GCE needs q >= 0, got {q}")))
            }
            Criterion::Ne { lambda } if !(0.0..=1.0).contains(&lambda) => {
                Err(ImpurityError::Parameter(format!("NE needs lambda in [0, 1], got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    /// Short lowercase name, also accepted by [`Criterion::from_name`].
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::Misclassification => "misclassification",
            Criterion::Mae => "mae",
            Criterion::Gce { .. } => "gce",
            Criterion::Ne { .. } => "ne",
            Criterion::Twoing => "twoing",
        }
    }

    /// Parameter string such as `lambda=0.5`; empty for parameter-free criteria.
    pub fn params_label(&self) -> String {
        match self {
            Criterion::Gce { q } => format!("q={q}"),
            Criterion::Ne { lambda } => format!("lambda={lambda}"),
            _ => String::new(),
        }
    }

    /// Builds a criterion from its name and optional parameters.
    pub fn from_name(name: &str, lambda: Option<f64>, q: Option<f64>) -> Result<Self, ImpurityError> {
        let c = match name.to_ascii_lowercase().as_str() {
            "gini" | "mse" => Criterion::Gini,
            "entropy" | "ce" => Criterion::Entropy,
            "misclassification" | "01" | "zero_one" => Criterion::Misclassification,
            "mae" => Criterion::Mae,
            "twoing" => Criterion::Twoing,
            "gce" => Criterion::Gce {
                q: q.ok_or_else(|| ImpurityError::Parameter("gce requires q".into()))?,
            },
            "ne" => Criterion::Ne {
                lambda: lambda.ok_or_else(|| ImpurityError::Parameter("ne requires lambda".into()))?,
            },
            other => return Err(ImpurityError::Parameter(format!("unknown criterion '{other}'"))),
        };
        c.validate()?;
        Ok(c)
    }

    /// `C` for criteria whose impurity is `C·(1 − ‖p‖∞)`.
    pub fn conservative_constant(&self) -> Option<f64> {
        match *self {
            Criterion::Misclassification => Some(1.0),
            Criterion::Mae => Some(2.0),
            Criterion::Gce { q } if q >= 1.0 => Some(1.0 / q),
            _ => None,
        }
    }

    /// Criteria whose optimal constant prediction is the majority one-hot vector.
    pub fn predicts_one_hot(&self) -> bool {
        self.conservative_constant().is_some() || matches!(self, Criterion::Ne { .. })
    }

    /// Largest split score that still halts growth at a node.
    pub(crate) fn halting_slack(&self) -> f64 {
        if self.conservative_constant().is_some() {
            0.0
        } else {
            1e-12
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params_label();
        if params.is_empty() {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}({})", self.name(), params)
        }
    }
}

/// A node impurity `W_S · I(p)` together with the node weight `W_S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedImpurity {
    pub value: f64,
    pub weight: f64,
}

fn entropy(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    0.0 - counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            p * p.ln()
        })
        .sum::<f64>()
}

fn gini(counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn one_minus_max(counts: &[u64], total: u64) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0);
    1.0 - max as f64 / total as f64
}

/// `sqrt((1 − ‖p‖₂²)·(K−1)/K)`, the λ-scaled branch of the NE impurity.
fn ne_sqrt_gini(counts: &[u64], total: u64) -> f64 {
    let k = counts.len() as f64;
    (gini(counts, total).max(0.0) * (k - 1.0) / k).sqrt()
}

/// Unweighted impurity `I(p)` for a non-empty node.
pub(crate) fn node_impurity(criterion: &Criterion, counts: &[u64], total: u64) -> f64 {
    debug_assert!(total > 0);
    match *criterion {
        Criterion::Gini | Criterion::Twoing => gini(counts, total),
        Criterion::Entropy => entropy(counts, total),
        Criterion::Misclassification => one_minus_max(counts, total),
        Criterion::Mae => 2.0 * one_minus_max(counts, total),
        Criterion::Gce { q: 0.0 } => entropy(counts, total),
        Criterion::Gce { q } if q >= 1.0 => one_minus_max(counts, total) / q,
        Criterion::Gce { q } => {
            let r = 1.0 / (1.0 - q);
            let t = total as f64;
            let norm = counts.iter().map(|&c| (c as f64 / t).powf(r)).sum::<f64>().powf(1.0 / r);
            (1.0 - norm) / q
        }
        Criterion::Ne { lambda: 0.0 } => ne_sqrt_gini(counts, total),
        Criterion::Ne { lambda } => {
            one_minus_max(counts, total).min(lambda * ne_sqrt_gini(counts, total))
        }
    }
}

/// Weighted impurity `W_S · I(p)` of a node with `dataset_size = |D|`.
///
/// For `Ne { lambda: 0.0 }` the value is the limit of `I(p)/λ` as `λ → 0`,
/// which ranks splits the same way as a very small positive λ.
pub fn impurity(
    criterion: &Criterion,
    hist: &ClassHistogram,
    dataset_size: u64,
) -> Result<WeightedImpurity, ImpurityError> {
    criterion.validate()?;
    if hist.is_empty() {
        return Err(ImpurityError::Empty);
    }
    if hist.total() > dataset_size {
        return Err(ImpurityError::DatasetSize { total: hist.total(), dataset_size });
    }
    let weight = hist.total() as f64 / dataset_size as f64;
    let value = weight * node_impurity(criterion, hist.counts(), hist.total());
    Ok(WeightedImpurity { value, weight })
}

fn check_partition(
    parent: &ClassHistogram,
    left: &ClassHistogram,
    right: &ClassHistogram,
) -> Result<(), ImpurityError> {
    parent.check_classes(left)?;
    parent.check_classes(right)?;
    let partitions = parent
        .counts()
        .iter()
        .zip(left.counts().iter().zip(right.counts()))
        .all(|(&p, (&l, &r))| p == l + r);
    if !partitions {
        return Err(ImpurityError::NotAPartition);
    }
    if left.is_empty() || right.is_empty() {
        return Err(ImpurityError::Empty);
    }
    Ok(())
}

/// Number of samples outside the majority class.
fn minority_mass(counts: &[u64], total: u64) -> u64 {
    total - counts.iter().copied().max().unwrap_or(0)
}

/// Risk reduction from counts, no validation.
///
/// Criteria of the form `C·(1 − ‖p‖∞)` are evaluated on integer minority
/// counts so that the zero-reduction case is exact.
pub(crate) fn risk_reduction_counts(
    criterion: &Criterion,
    parent: (&[u64], u64),
    left: (&[u64], u64),
    right: (&[u64], u64),
    dataset_size: u64,
) -> f64 {
    let n = dataset_size as f64;
    if let Some(c) = criterion.conservative_constant() {
        let diff = minority_mass(parent.0, parent.1) as i64
            - minority_mass(left.0, left.1) as i64
            - minority_mass(right.0, right.1) as i64;
        return c * diff as f64 / n;
    }
    let weighted = |(counts, total): (&[u64], u64)| {
        total as f64 / n * node_impurity(criterion, counts, total)
    };
    weighted(parent) - weighted(left) - weighted(right)
}

/// CART twoing score with node-relative child weights.
pub(crate) fn twoing_counts(left: (&[u64], u64), right: (&[u64], u64)) -> f64 {
    let total = (left.1 + right.1) as f64;
    let (wl, wr) = (left.1 as f64 / total, right.1 as f64 / total);
    let spread: f64 = left
        .0
        .iter()
        .zip(right.0)
        .map(|(&l, &r)| (l as f64 / left.1 as f64 - r as f64 / right.1 as f64).abs())
        .sum();
    wl * wr / 4.0 * spread * spread
}

/// The quantity a tree maximizes when choosing a split.
pub(crate) fn split_score_counts(
    criterion: &Criterion,
    parent: (&[u64], u64),
    left: (&[u64], u64),
    right: (&[u64], u64),
    dataset_size: u64,
) -> f64 {
    match criterion {
        Criterion::Twoing => twoing_counts(left, right),
        _ => risk_reduction_counts(criterion, parent, left, right, dataset_size),
    }
}

/// Risk reduction `R̂*(S) − R̂*(S_left) − R̂*(S_right)` of a split.
///
/// Non-negative for every criterion. For [`Criterion::Twoing`] this is the
/// Gini risk reduction; see [`split_score`] for the twoing score itself.
pub fn risk_reduction(
    criterion: &Criterion,
    parent: &ClassHistogram,
    left: &ClassHistogram,
    right: &ClassHistogram,
    dataset_size: u64,
) -> Result<f64, ImpurityError> {
    criterion.validate()?;
    check_partition(parent, left, right)?;
    if parent.total() > dataset_size {
        return Err(ImpurityError::DatasetSize { total: parent.total(), dataset_size });
    }
    Ok(risk_reduction_counts(
        criterion,
        (parent.counts(), parent.total()),
        (left.counts(), left.total()),
        (right.counts(), right.total()),
        dataset_size,
    ))
}

/// Score maximized by split search: the twoing score for [`Criterion::Twoing`],
/// the risk reduction otherwise.
pub fn split_score(
    criterion: &Criterion,
    parent: &ClassHistogram,
    left: &ClassHistogram,
    right: &ClassHistogram,
    dataset_size: u64,
) -> Result<f64, ImpurityError> {
    match criterion {
        Criterion::Twoing => {
            check_partition(parent, left, right)?;
            Ok(twoing_counts((left.counts(), left.total()), (right.counts(), right.total())))
        }
        _ => risk_reduction(criterion, parent, left, right, dataset_size),
    }
}

/// Probability vector minimizing the partial empirical risk of a node.
///
/// One-hot on the majority class for conservative criteria and NE, `p` for
/// Gini, entropy and twoing, and `p^{1/(1−q)}` renormalized for GCE with
/// `q ∈ (0, 1)`.
pub fn optimal_constant_prediction(
    criterion: &Criterion,
    hist: &ClassHistogram,
) -> Result<Vec<f64>, ImpurityError> {
    criterion.validate()?;
    if hist.is_empty() {
        return Err(ImpurityError::Empty);
    }
    let p = probabilities(hist.counts(), hist.total());
    let out = match *criterion {
        c if c.predicts_one_hot() => {
            let mut v = vec![0.0; p.len()];
            v[hist.argmax()] = 1.0;
            v
        }
        Criterion::Gce { q } if q > 0.0 => {
            let r = 1.0 / (1.0 - q);
            let powered: Vec<f64> = p.iter().map(|&x| x.powf(r)).collect();
            let s: f64 = powered.iter().sum();
            powered.into_iter().map(|x| x / s).collect()
        }
        _ => p,
    };
    Ok(out)
}

/// A margin distribution whose CDF `F` defines the loss `ℓ(z) = F(−z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdfSpec {
    /// Point mass at zero; yields the 01 loss `(1 − sign z)/2`.
    BernoulliAtZero,
    /// Standard logistic; yields the sigmoid loss.
    Logistic,
    /// Uniform on `[−1, 1]`; yields the ramp loss.
    Uniform,
    /// `μ − X` with `X ~ Exp(1)`; yields the NE loss.
    ShiftedNegativeExponential { mu: f64 },
}

impl CdfSpec {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            // The midpoint value at 0 matches the (1 − sign z)/2 form of the 01 loss.
            CdfSpec::BernoulliAtZero => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            CdfSpec::Logistic => 1.0 / (1.0 + (-x).exp()),
            CdfSpec::Uniform => ((x + 1.0) / 2.0).clamp(0.0, 1.0),
            CdfSpec::ShiftedNegativeExponential { mu } => (x - mu).exp().min(1.0),
        }
    }
}

/// Distribution loss `F(−z)` at margin `z = y·ŷ`.
pub fn distribution_loss(cdf: &CdfSpec, margin: f64) -> f64 {
    cdf.cdf(-margin)
}

/// `λ = 2e^{−μ}`.
pub fn lambda_from_mu(mu: f64) -> Result<f64, ImpurityError> {
    if !(mu >= 0.0) {
        return Err(ImpurityError::Parameter(format!("mu must be >= 0, got {mu}")));
    }
    Ok(2.0 * (-mu).exp())
}

/// `μ = ln(2/λ)` for `λ ∈ (0, 1]`.
pub fn mu_from_lambda(lambda: f64) -> Result<f64, ImpurityError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(ImpurityError::Parameter(format!("lambda must be in (0, 1], got {lambda}")));
    }
    Ok((2.0 / lambda).ln())
}
