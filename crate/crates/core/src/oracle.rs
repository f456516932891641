//! Brute-force reference computations.
//!
//! Nothing here uses the closed forms in [`crate::impurity`]: impurities are
//! recomputed by directly minimizing the partial empirical risk of a loss over
//! a grid, and early stopping is checked by enumerating every split.
//!
//! The simplex search is exact over its grid. Every supported loss makes the
//! partial risk `Σ_j p_j ℓ(ŷ, e_j)` a sum of per-coordinate terms `g_i(ŷ_i)`
//! plus a constant, so the grid minimum is found by dynamic programming over
//! the number of grid units spent so far, then refined on finer grids around
//! the incumbent.

use crate::impurity::{self, ClassHistogram, Criterion, ImpurityError};
use crate::matrix::FeatureMatrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("the NE loss is defined for binary problems only, got {0} classes")]
    NotBinary(usize),
    #[error("instance has {0} samples; the exhaustive oracle accepts at most {MAX_EXHAUSTIVE}")]
    TooLarge(usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Impurity(#[from] ImpurityError),
}

/// Largest instance [`exhaustive_early_stop_check`] will enumerate.
pub const MAX_EXHAUSTIVE: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub simplex_step: f64,
    /// Number of tenfold refinements of the simplex grid around the incumbent.
    pub simplex_refinements: u32,
    pub scalar_range: (f64, f64),
    pub scalar_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { simplex_step: 0.005, simplex_refinements: 2, scalar_range: (-20.0, 20.0), scalar_points: 4001 }
    }
}

/// Losses the oracle minimizes directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleLoss {
    /// `‖ŷ − e_j‖₂²`
    Mse,
    /// `−ln ŷ_j`
    Ce,
    /// `1(ŷ ≠ e_j)`
    ZeroOne,
    /// `‖ŷ − e_j‖₁`
    Mae,
    /// `(1 − ŷ_j^q)/q`, or CE at `q = 0`
    Gce(f64),
    /// `min{1, exp(−yŷ − μ)}` on a real score `ŷ`, classes 0/1 mapped to `y = +1/−1`
    Ne(f64),
}

impl OracleLoss {
    /// The loss whose impurity a criterion claims to be, if any.
    pub fn for_criterion(c: &Criterion) -> Option<Self> {
        Some(match *c {
            Criterion::Gini => OracleLoss::Mse,
            Criterion::Entropy => OracleLoss::Ce,
            Criterion::Misclassification => OracleLoss::ZeroOne,
            Criterion::Mae => OracleLoss::Mae,
            Criterion::Gce { q } => OracleLoss::Gce(q),
            Criterion::Ne { lambda } if lambda > 0.0 => OracleLoss::Ne(impurity::mu_from_lambda(lambda).ok()?),
            _ => return None,
        })
    }

    /// Loss of the probability vector `y_hat` on class `j`, evaluated directly.
    pub fn simplex_loss(&self, y_hat: &[f64], j: usize) -> f64 {
        match *self {
            OracleLoss::Mse => y_hat
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - if i == j { 1.0 } else { 0.0 }).powi(2))
                .sum(),
            OracleLoss::Ce | OracleLoss::Gce(0.0) => -y_hat[j].ln(),
            OracleLoss::ZeroOne => {
                let exact = y_hat.iter().enumerate().all(|(i, &v)| v == if i == j { 1.0 } else { 0.0 });
                if exact { 0.0 } else { 1.0 }
            }
            OracleLoss::Mae => y_hat
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
                .sum(),
            OracleLoss::Gce(q) => (1.0 - y_hat[j].powf(q)) / q,
            OracleLoss::Ne(_) => f64::NAN,
        }
    }

    /// Per-coordinate term `g_i(v)` of the partial risk on the simplex.
    fn coordinate_term(&self, p_i: f64, v: f64, at_vertex: bool) -> f64 {
        let weighted = |loss: f64| if p_i == 0.0 { 0.0 } else { p_i * loss };
        match *self {
            // Σ_j p_j ‖ŷ − e_j‖² = Σ_i (ŷ_i² − 2 p_i ŷ_i) + 1
            OracleLoss::Mse => v * v - 2.0 * p_i * v,
            OracleLoss::Ce | OracleLoss::Gce(0.0) => weighted(-v.ln()),
            OracleLoss::ZeroOne => weighted(if at_vertex { 0.0 } else { 1.0 }),
            // Σ_j p_j ‖ŷ − e_j‖₁ = 2 − 2 Σ_i p_i ŷ_i on the simplex
            OracleLoss::Mae => -2.0 * p_i * v,
            OracleLoss::Gce(q) => weighted((1.0 - v.powf(q)) / q),
            OracleLoss::Ne(_) => unreachable!("NE is minimized over a scalar score"),
        }
    }

    fn constant_term(&self) -> f64 {
        match self {
            OracleLoss::Mse => 1.0,
            OracleLoss::Mae => 2.0,
            _ => 0.0,
        }
    }
}

/// Where the brute-force minimum was found.
#[derive(Debug, Clone, PartialEq)]
pub enum Minimizer {
    Simplex(Vec<f64>),
    /// Real-valued score; may be `±∞` when the infimum is a limit.
    Score(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMinimum {
    /// Weighted minimum partial risk `W_S · min_ŷ Σ_j p_j ℓ(ŷ, e_j)`.
    pub value: f64,
    pub minimizer: Minimizer,
}

/// Minimizes the partial empirical risk of `loss` on a node by brute force.
pub fn brute_force_impurity(
    loss: OracleLoss,
    hist: &ClassHistogram,
    dataset_size: u64,
    grid: &GridSpec,
) -> Result<OracleMinimum, OracleError> {
    if hist.is_empty() {
        return Err(ImpurityError::Empty.into());
    }
    let weight = hist.total() as f64 / dataset_size as f64;
    let p: Vec<f64> = hist.counts().iter().map(|&c| c as f64 / hist.total() as f64).collect();
    let (value, minimizer) = match loss {
        OracleLoss::Ne(mu) => {
            if p.len() != 2 {
                return Err(OracleError::NotBinary(p.len()));
            }
            let (v, s) = ne_scalar_minimum(p[0], p[1], mu, grid)?;
            (v, Minimizer::Score(s))
        }
        _ => {
            let (v, y) = simplex_minimum(loss, &p, grid)?;
            (v, Minimizer::Simplex(y))
        }
    };
    Ok(OracleMinimum { value: weight * value, minimizer })
}

/// Grid minimum over the simplex. Each pass allows every coordinate a set of
/// unit offsets around a center and solves the allocation by DP.
fn simplex_minimum(loss: OracleLoss, p: &[f64], grid: &GridSpec) -> Result<(f64, Vec<f64>), OracleError> {
    let base = (1.0 / grid.simplex_step).round();
    if !(grid.simplex_step > 0.0) || base < 1.0 || (base * grid.simplex_step - 1.0).abs() > 1e-9 {
        return Err(OracleError::Grid(format!("step {} does not divide 1", grid.simplex_step)));
    }
    let k = p.len();
    let mut units = base as usize;
    // first pass: every coordinate may take any value in 0..=units
    let mut choices: Vec<Vec<usize>> = vec![(0..=units).collect(); k];
    let mut best = allocate(loss, p, units, &choices);
    for _ in 0..grid.simplex_refinements {
        units *= 10;
        choices = best
            .1
            .iter()
            .map(|&u| {
                let center = u * 10;
                (center.saturating_sub(10)..=(center + 10).min(units)).collect()
            })
            .collect();
        let refined = allocate(loss, p, units, &choices);
        if refined.0 <= best.0 {
            best = refined;
        } else {
            best.1.iter_mut().for_each(|u| *u *= 10);
        }
    }
    let y = best.1.iter().map(|&u| u as f64 / units as f64).collect();
    Ok((best.0 + loss.constant_term(), y))
}

/// Minimizes `Σ_i g_i(u_i / units)` subject to `Σ_i u_i = units`, `u_i ∈ choices[i]`.
fn allocate(loss: OracleLoss, p: &[f64], units: usize, choices: &[Vec<usize>]) -> (f64, Vec<usize>) {
    let k = p.len();
    let width = units + 1;
    let mut cost = vec![f64::INFINITY; width];
    cost[0] = 0.0;
    let mut pick = vec![0usize; k * width];
    for i in 0..k {
        let terms: Vec<f64> = choices[i]
            .iter()
            .map(|&u| loss.coordinate_term(p[i], u as f64 / units as f64, u == units))
            .collect();
        let mut next = vec![f64::INFINITY; width];
        for (spent, &c) in cost.iter().enumerate() {
            if c == f64::INFINITY {
                continue;
            }
            for (&u, &term) in choices[i].iter().zip(&terms) {
                let total = spent + u;
                if total > units {
                    break;
                }
                let candidate = c + term;
                if candidate < next[total] {
                    next[total] = candidate;
                    pick[i * width + total] = u;
                }
            }
        }
        cost = next;
    }
    let mut alloc = vec![0usize; k];
    let mut remaining = units;
    for i in (0..k).rev() {
        let u = pick[i * width + remaining];
        alloc[i] = u;
        remaining -= u;
    }
    (cost[units], alloc)
}

/// NE partial risk of the score `s` with class proportions `p_pos`, `p_neg`.
fn ne_risk(p_pos: f64, p_neg: f64, mu: f64, s: f64) -> f64 {
    if s == f64::INFINITY {
        return p_neg;
    }
    if s == f64::NEG_INFINITY {
        return p_pos;
    }
    p_pos * (-s - mu).exp().min(1.0) + p_neg * (s - mu).exp().min(1.0)
}

/// Ternary search for the minimum of a convex function on `[lo, hi]`.
fn ternary(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

fn ne_scalar_minimum(p_pos: f64, p_neg: f64, mu: f64, grid: &GridSpec) -> Result<(f64, f64), OracleError> {
    let (lo, hi) = grid.scalar_range;
    if !(lo < -mu && mu < hi) || grid.scalar_points < 2 {
        return Err(OracleError::Grid("scalar range must strictly contain [-mu, mu]".into()));
    }
    let risk = |s: f64| ne_risk(p_pos, p_neg, mu, s);
    let mut candidates = vec![f64::NEG_INFINITY, f64::INFINITY, -mu, mu];
    let step = (hi - lo) / (grid.scalar_points - 1) as f64;
    candidates.extend((0..grid.scalar_points).map(|i| lo + step * i as f64));
    // each piece is convex: exp + constant outside the band, a sum of exponentials inside
    for (a, b) in [(lo, -mu), (-mu, mu), (mu, hi)] {
        if a < b {
            candidates.push(ternary(risk, a, b));
        }
    }
    let best = candidates
        .into_iter()
        .map(|s| (risk(s), s))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("candidates are non-empty");
    Ok(best)
}

/// A split found by [`exhaustive_early_stop_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub feature: usize,
    pub threshold: f64,
    pub risk_reduction: f64,
    pub left: ClassHistogram,
    pub right: ClassHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopReport {
    /// Every split has risk reduction `<= 0` (or there is no split at all).
    pub halts: bool,
    /// Split with the largest risk reduction, if any split exists.
    pub witness: Option<Witness>,
    /// `‖n_S‖∞ = ‖n_L‖∞ + ‖n_R‖∞` holds for every split: the majority classes
    /// of the node stay majority classes in both children.
    pub majority_preserved: bool,
    /// Both children reproduce the parent's class distribution for every split.
    pub distributions_identical: bool,
    pub n_splits: usize,
}

/// Enumerates every threshold split of a small node and reports whether
/// growth halts under `criterion`, alongside the count-vector conditions that
/// characterize halting.
pub fn exhaustive_early_stop_check(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    criterion: &Criterion,
) -> Result<EarlyStopReport, OracleError> {
    let n = labels.len();
    if n > MAX_EXHAUSTIVE {
        return Err(OracleError::TooLarge(n));
    }
    let parent = ClassHistogram::from_labels(labels, n_classes)?;
    if parent.is_empty() {
        return Err(ImpurityError::Empty.into());
    }
    let mut report = EarlyStopReport {
        halts: true,
        witness: None,
        majority_preserved: true,
        distributions_identical: true,
        n_splits: 0,
    };
    for feature in 0..features.n_cols() {
        let mut values: Vec<f64> = (0..n).map(|i| features.get(i, feature)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = 0.5 * pair[0] + 0.5 * pair[1];
            let threshold = if threshold < pair[1] { threshold } else { pair[0] };
            let mut left = ClassHistogram::zeros(n_classes)?;
            let mut right = ClassHistogram::zeros(n_classes)?;
            for (i, &y) in labels.iter().enumerate() {
                if features.get(i, feature) <= threshold {
                    left.add(y);
                } else {
                    right.add(y);
                }
            }
            report.n_splits += 1;
            let rr = impurity::risk_reduction(criterion, &parent, &left, &right, n as u64)?;
            if rr > criterion_slack(criterion) {
                report.halts = false;
            }
            if parent.max_count() != left.max_count() + right.max_count() {
                report.majority_preserved = false;
            }
            let same = |child: &ClassHistogram| {
                child.counts().iter().zip(parent.counts()).all(|(&c, &p)| c * parent.total() == p * child.total())
            };
            if !same(&left) || !same(&right) {
                report.distributions_identical = false;
            }
            if report.witness.as_ref().is_none_or(|w| rr > w.risk_reduction) {
                report.witness = Some(Witness { feature, threshold, risk_reduction: rr, left, right });
            }
        }
    }
    Ok(report)
}

fn criterion_slack(c: &Criterion) -> f64 {
    if c.conservative_constant().is_some() {
        0.0
    } else {
        1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(c: &[u64]) -> ClassHistogram {
        ClassHistogram::new(c.to_vec()).unwrap()
    }

    fn simplex(m: &OracleMinimum) -> &[f64] {
        match &m.minimizer {
            Minimizer::Simplex(v) => v,
            other => panic!("expected simplex minimizer, got {other:?}"),
        }
    }

    #[test]
    fn zero_one_and_mae_minima() {
        let g = GridSpec::default();
        let m = brute_force_impurity(OracleLoss::ZeroOne, &hist(&[3, 1]), 4, &g).unwrap();
        assert!((m.value - 0.25).abs() < 1e-12);
        assert_eq!(simplex(&m), &[1.0, 0.0]);
        let m = brute_force_impurity(OracleLoss::Mae, &hist(&[3, 1]), 4, &g).unwrap();
        assert!((m.value - 0.5).abs() < 1e-12);
        assert_eq!(simplex(&m), &[1.0, 0.0]);
    }

    #[test]
    fn ne_balanced_minimum_is_interior() {
        // λ = 0.5: the interior value e^{−μ} = 0.25 beats both limits
        let mu = 4f64.ln();
        let m = brute_force_impurity(OracleLoss::Ne(mu), &hist(&[5, 5]), 10, &GridSpec::default()).unwrap();
        assert!((m.value - 0.25).abs() < 1e-12);
        match m.minimizer {
            Minimizer::Score(s) => assert!(s.abs() < mu),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ne_skewed_minimum_is_a_limit() {
        // λ = 1: the misclassification branch wins, reached as ŷ → +∞
        let m = brute_force_impurity(OracleLoss::Ne(std::f64::consts::LN_2), &hist(&[9, 1]), 10, &GridSpec::default())
            .unwrap();
        assert!((m.value - 0.1).abs() < 1e-12);
        assert_eq!(m.minimizer, Minimizer::Score(f64::INFINITY));
    }

    #[test]
    fn ne_requires_binary() {
        let err = brute_force_impurity(OracleLoss::Ne(1.0), &hist(&[1, 1, 1]), 3, &GridSpec::default());
        assert_eq!(err, Err(OracleError::NotBinary(3)));
    }

    #[test]
    fn worked_values_from_direct_minimization() {
        let g = GridSpec::default();
        // NE λ=0.5 on (7,3)
        let mu = (2.0f64 / 0.5).ln();
        let m = brute_force_impurity(OracleLoss::Ne(mu), &hist(&[7, 3]), 10, &g).unwrap();
        assert!((m.value - 0.229_128_784_747_792).abs() < 1e-9);
        // GCE q=0.5 on (5,5)
        let m = brute_force_impurity(OracleLoss::Gce(0.5), &hist(&[5, 5]), 10, &g).unwrap();
        assert!((m.value - 0.585_786_437_626_905).abs() < 1e-9);
        assert_eq!(simplex(&m), &[0.5, 0.5]);
        // GCE q=0.5 on (8,2): minimizer p² normalized
        let m = brute_force_impurity(OracleLoss::Gce(0.5), &hist(&[8, 2]), 10, &g).unwrap();
        let y = simplex(&m);
        assert!((y[0] - 0.64 / 0.68).abs() < 1e-4, "{y:?}");
    }

    #[test]
    fn separable_expansion_matches_direct_loss() {
        let p = [0.1, 0.5, 0.15, 0.25];
        let points = [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.0, 1.0, 0.0, 0.0], [0.05, 0.4, 0.2, 0.35]];
        for loss in [OracleLoss::Mse, OracleLoss::Ce, OracleLoss::ZeroOne, OracleLoss::Mae, OracleLoss::Gce(0.3), OracleLoss::Gce(1.5)] {
            for y in &points {
                let direct: f64 = (0..4).map(|j| p[j] * loss.simplex_loss(y, j)).sum();
                let separable: f64 = (0..4)
                    .map(|i| loss.coordinate_term(p[i], y[i], y[i] == 1.0))
                    .sum::<f64>()
                    + loss.constant_term();
                assert!(direct == separable || (direct - separable).abs() < 1e-12, "{loss:?} at {y:?}: {direct} vs {separable}");
            }
        }
    }

    #[test]
    fn bad_grid_rejected() {
        let g = GridSpec { simplex_step: 0.3, ..GridSpec::default() };
        assert!(matches!(brute_force_impurity(OracleLoss::Mse, &hist(&[1, 1]), 2, &g), Err(OracleError::Grid(_))));
    }

    fn four_two_instance() -> (FeatureMatrix, Vec<usize>) {
        (FeatureMatrix::from_column(&[0.0, 0.0, 0.0, 0.0, 1.0, 1.0]), vec![0, 0, 0, 1, 0, 1])
    }

    #[test]
    fn early_stop_misclassification_vs_entropy() {
        let (x, y) = four_two_instance();
        let mc = exhaustive_early_stop_check(&x, &y, 2, &Criterion::Misclassification).unwrap();
        assert!(mc.halts && mc.majority_preserved && !mc.distributions_identical);
        let ce = exhaustive_early_stop_check(&x, &y, 2, &Criterion::Entropy).unwrap();
        assert!(!ce.halts);
        let w = ce.witness.unwrap();
        assert!((w.risk_reduction - 0.0306).abs() < 5e-5);
        assert_eq!(w.left.counts(), &[3, 1]);
    }

    #[test]
    fn pure_node_halts_everywhere() {
        let x = FeatureMatrix::from_column(&[0.0, 1.0, 2.0]);
        for c in [Criterion::Gini, Criterion::Entropy, Criterion::Misclassification, Criterion::Ne { lambda: 0.5 }] {
            assert!(exhaustive_early_stop_check(&x, &[1, 1, 1], 2, &c).unwrap().halts);
        }
    }

    #[test]
    fn oversized_instance_refused() {
        let x = FeatureMatrix::from_column(&vec![0.0; 501]);
        let y = vec![0; 501];
        assert_eq!(
            exhaustive_early_stop_check(&x, &y, 2, &Criterion::Gini),
            Err(OracleError::TooLarge(501))
        );
    }
}
