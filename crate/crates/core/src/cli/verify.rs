//! Self-check suites run by `robust-trees verify`.
//!
//! Each suite compares the library against the brute-force references in
//! [`crate::oracle`] or against sampling, and returns one [`Check`] per case.

use crate::impurity::{self, ClassHistogram, Criterion};
use crate::matrix::FeatureMatrix;
use crate::noise::{self, NoiseError};
use crate::oracle::{self, GridSpec, Minimizer, OracleError, OracleLoss};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tree::{self, TreeParams};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Impurity,
    EarlyStop,
    Hoeffding,
    Noise,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Impurity => "impurity",
            Suite::EarlyStop => "early-stop",
            Suite::Hoeffding => "hoeffding",
            Suite::Noise => "noise",
        })
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Impurity(#[from] impurity::ImpurityError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Fit(#[from] tree::FitError),
    #[error(transparent)]
    Matrix(#[from] crate::matrix::MatrixError),
}

/// Outcome of one group of cases. `failures` holds the inputs of failing cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub detail: String,
    pub failures: Vec<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Perturbation added to closed forms to make sure the suites can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fault(pub f64);

pub fn run(suite: Suite, seed: u64, fault: Fault) -> Result<Vec<Check>, VerifyError> {
    match suite {
        Suite::Impurity => impurity_suite(seed, fault),
        Suite::EarlyStop => early_stop_suite(seed, fault),
        Suite::Hoeffding => hoeffding_suite(seed, fault),
        Suite::Noise => noise_suite(seed, fault),
    }
}

fn random_hist(rng: &mut ChaCha8Rng, k: usize) -> ClassHistogram {
    loop {
        let counts: Vec<u64> = (0..k).map(|_| rng.random_range(0..=20)).collect();
        if counts.iter().any(|&c| c > 0) {
            return ClassHistogram::new(counts).expect("k >= 2");
        }
    }
}

/// Criteria with a loss the oracle can minimize.
pub fn oracle_criteria() -> Vec<Criterion> {
    vec![
        Criterion::Gini,
        Criterion::Entropy,
        Criterion::Misclassification,
        Criterion::Mae,
        Criterion::Gce { q: 0.0 },
        Criterion::Gce { q: 0.5 },
        Criterion::Gce { q: 1.0 },
        Criterion::Gce { q: 2.0 },
        Criterion::Ne { lambda: 0.25 },
        Criterion::Ne { lambda: 0.5 },
        Criterion::Ne { lambda: 1.0 },
    ]
}

fn impurity_suite(seed: u64, fault: Fault) -> Result<Vec<Check>, VerifyError> {
    let grid = GridSpec::default();
    let mut checks = Vec::new();
    for (ci, c) in oracle_criteria().into_iter().enumerate() {
        let loss = OracleLoss::for_criterion(&c).expect("oracle criteria have losses");
        let binary_only = matches!(c, Criterion::Ne { .. });
        let tol = if binary_only { 1e-8 } else { 1e-4 };
        let mut rng = rng_from_seed(derive_seed(seed, &[0, ci as u64]));
        let mut worst = 0.0f64;
        let mut failures = Vec::new();
        let started = Instant::now();
        for _ in 0..200 {
            let k = if binary_only { 2 } else { rng.random_range(2..=5) };
            let h = random_hist(&mut rng, k);
            let n = h.total() + rng.random_range(0..=20);
            let closed = impurity::impurity(&c, &h, n)?.value + fault.0;
            let reference = oracle::brute_force_impurity(loss, &h, n, &grid)?.value;
            let err = (closed - reference).abs();
            worst = worst.max(err);
            if !(err <= tol) {
                failures.push(format!("counts={:?} n={n} closed={closed} oracle={reference}", h.counts()));
            }
        }
        checks.push(Check {
            name: format!("closed form vs oracle: {c}"),
            cases: 200,
            detail: format!("max |err| {worst:.2e} (tol {tol:e}), {:.2}s", started.elapsed().as_secs_f64()),
            failures,
        });
    }

    let conservative = [Criterion::Misclassification, Criterion::Mae, Criterion::Gce { q: 1.0 }, Criterion::Gce { q: 2.0 }];
    for (ci, c) in conservative.into_iter().enumerate() {
        let constant = c.conservative_constant().expect("conservative");
        let mut rng = rng_from_seed(derive_seed(seed, &[1, ci as u64]));
        let mut failures = Vec::new();
        for _ in 0..1000 {
            let k = rng.random_range(2..=5);
            let h = random_hist(&mut rng, k);
            let n = h.total() + rng.random_range(0..=20);
            let w = h.total() as f64 / n as f64;
            let pmax = h.max_count() as f64 / h.total() as f64;
            let closed = impurity::impurity(&c, &h, n)?.value + fault.0;
            if closed != constant * w * (1.0 - pmax) {
                failures.push(format!("counts={:?} n={n} closed={closed}", h.counts()));
            }
        }
        checks.push(Check {
            name: format!("conservative identity: {c}"),
            cases: 1000,
            detail: format!("C = {constant}, exact equality"),
            failures,
        });
    }

    let prediction = [
        Criterion::Gini,
        Criterion::Entropy,
        Criterion::Misclassification,
        Criterion::Mae,
        Criterion::Gce { q: 0.5 },
        Criterion::Gce { q: 2.0 },
    ];
    for (ci, c) in prediction.into_iter().enumerate() {
        let loss = OracleLoss::for_criterion(&c).expect("oracle criteria have losses");
        let mut rng = rng_from_seed(derive_seed(seed, &[2, ci as u64]));
        let mut failures = Vec::new();
        for _ in 0..50 {
            let k = rng.random_range(2..=5);
            let h = random_hist(&mut rng, k);
            let mut predicted = impurity::optimal_constant_prediction(&c, &h)?;
            predicted[0] += fault.0;
            let Minimizer::Simplex(found) = oracle::brute_force_impurity(loss, &h, h.total(), &grid)?.minimizer else {
                unreachable!("simplex losses return simplex minimizers")
            };
            if !prediction_matches(&c, &h, &predicted, &found, 2.0 * grid.simplex_step) {
                failures.push(format!("counts={:?} closed={predicted:?} oracle={found:?}", h.counts()));
            }
        }
        checks.push(Check {
            name: format!("optimal prediction: {c}"),
            cases: 50,
            detail: format!("within {} of oracle minimizer", 2.0 * grid.simplex_step),
            failures,
        });
    }
    Ok(checks)
}

/// With tied majorities the oracle may return any point on the face spanned by
/// the tied vertices (MAE and GCE q=1 are linear there).
fn prediction_matches(c: &Criterion, h: &ClassHistogram, predicted: &[f64], found: &[f64], tol: f64) -> bool {
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);
    if !c.predicts_one_hot() {
        return close(predicted, found);
    }
    let majority = |j: usize| h.counts()[j] == h.max_count();
    let one_hot_majority =
        (0..predicted.len()).any(|j| majority(j) && predicted.iter().enumerate().all(|(i, &x)| x == if i == j { 1.0 } else { 0.0 }));
    let on_majority_face = found.iter().enumerate().all(|(j, &v)| v == 0.0 || majority(j));
    one_hot_majority && on_majority_face
}

/// A small single-feature instance whose feature takes a few distinct values.
///
/// Even indices give every value group the same weak-majority class, so any
/// split keeps the majority; every fifth index gives all groups the same
/// class distribution; the rest let each group favour a random class.
pub fn early_stop_instance(index: usize, seed: u64) -> (FeatureMatrix, Vec<usize>, usize) {
    let mut rng = rng_from_seed(derive_seed(seed, &[3, index as u64]));
    let k = rng.random_range(2..=3);
    let groups = rng.random_range(2..=5);
    let base: Vec<usize> = (0..k).map(|_| rng.random_range(1..=8)).collect();
    let majority = rng.random_range(0..k);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for g in 0..groups {
        let counts: Vec<usize> = if index % 5 == 0 {
            let scale = rng.random_range(1..=3);
            base.iter().map(|&b| b * scale).collect()
        } else if index % 2 == 0 {
            let mut c: Vec<usize> = (0..k).map(|_| rng.random_range(0..=10)).collect();
            c[majority] = *c.iter().max().expect("k >= 2") + rng.random_range(0..=2);
            c
        } else {
            let mut c: Vec<usize> = (0..k).map(|_| rng.random_range(0..=4)).collect();
            c[rng.random_range(0..k)] += rng.random_range(5..=12);
            c
        };
        for (class, &cnt) in counts.iter().enumerate() {
            for _ in 0..cnt {
                x.push(g as f64);
                y.push(class);
            }
        }
    }
    if y.is_empty() {
        x.push(0.0);
        y.push(0);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut rng);
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys = order.iter().map(|&i| y[i]).collect();
    (FeatureMatrix::from_column(&xs), ys, k)
}

fn early_stop_suite(seed: u64, fault: Fault) -> Result<Vec<Check>, VerifyError> {
    let mut miscl = Vec::new();
    let mut ent = Vec::new();
    let mut halting = 0;
    for i in 0..50 {
        let (x, y, k) = early_stop_instance(i, seed);
        let report = oracle::exhaustive_early_stop_check(&x, &y, k, &Criterion::Misclassification)?;
        let params = TreeParams { max_depth: Some(1), ..TreeParams::new(Criterion::Misclassification) };
        let fitted = tree::fit(&x, &y, k, &params)?;
        // a positive fault pretends every split is worth taking
        let halts = fitted.nodes().len() == 1 && fault.0 <= 0.0;
        if halts {
            halting += 1;
        }
        let counts = ClassHistogram::from_labels(&y, k)?;
        if halts != report.majority_preserved || halts != report.halts {
            miscl.push(format!(
                "instance {i}: counts={:?} tree halts={halts} majority preserved={} oracle halts={}",
                counts.counts(),
                report.majority_preserved,
                report.halts
            ));
        }
        let entropy_tree = tree::fit(&x, &y, k, &TreeParams { max_depth: Some(1), ..TreeParams::new(Criterion::Entropy) })?;
        let splits = entropy_tree.nodes().len() > 1;
        if splits == report.distributions_identical {
            ent.push(format!(
                "instance {i}: counts={:?} entropy splits={splits} distributions identical={}",
                counts.counts(),
                report.distributions_identical
            ));
        }
    }
    Ok(vec![
        Check {
            name: "misclassification halts iff majority preserved".into(),
            cases: 50,
            detail: format!("{halting} of 50 instances halt"),
            failures: miscl,
        },
        Check {
            name: "entropy splits iff distributions differ".into(),
            cases: 50,
            detail: "depth-1 fits".into(),
            failures: ent,
        },
    ])
}

/// Clean class distribution with a clear majority, as exact multiples of `1/n`.
pub fn hoeffding_distribution(k: usize, n: u64) -> Vec<f64> {
    let major = match k {
        2 => 0.7,
        _ => 2.5 / k as f64,
    };
    let rest = (1.0 - major) / (k - 1) as f64;
    let p: Vec<f64> = (0..k).map(|j| if j == 0 { major } else { rest }).collect();
    noise::realize_counts(&p, n).into_iter().map(|c| c as f64 / n as f64).collect()
}

fn hoeffding_suite(seed: u64, fault: Fault) -> Result<Vec<Check>, VerifyError> {
    let mut checks = Vec::new();
    let mut case = 0u64;
    for k in [2usize, 5, 10] {
        let mut failures = Vec::new();
        let mut pairs = Vec::new();
        for eta in [0.1, 0.2, 0.3] {
            for n in [50u64, 200, 1000] {
                let p = hoeffding_distribution(k, n);
                let bound = noise::hoeffding_bound(&p, eta, n)? + fault.0.abs() * 1e3;
                let mc = noise::majority_preservation_mc(&p, eta, n, 10_000, derive_seed(seed, &[4, case]))?;
                case += 1;
                pairs.push(format!("η={eta} n={n}: ({bound:.4}, {:.4})", mc.frequency));
                if mc.frequency < bound - 3.0 * mc.stderr {
                    failures.push(format!(
                        "K={k} η={eta} n={n} p={p:?}: bound {bound} > empirical {} + 3·{}",
                        mc.frequency, mc.stderr
                    ));
                }
            }
        }
        checks.push(Check {
            name: format!("hoeffding bound K={k}"),
            cases: pairs.len(),
            detail: format!("(bound, empirical) {}", pairs.join("; ")),
            failures,
        });
    }
    Ok(checks)
}

fn within_sigmas(observed: f64, n: f64, rate: f64, sigmas: f64) -> bool {
    let sd = (n * rate * (1.0 - rate)).sqrt();
    (observed - n * rate).abs() <= sigmas * sd
}

/// Three Gaussian blobs in the plane; the third sits far from the other two.
pub fn three_blobs(per_class: usize, seed: u64) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let centers = [(0.0, 0.0), (3.0, 0.0), (30.0, 0.0)];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (class, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(vec![cx + normal.sample(&mut rng), cy + normal.sample(&mut rng)]);
            labels.push(class);
        }
    }
    (FeatureMatrix::from_rows(&rows).expect("rectangular"), labels)
}

fn noise_suite(seed: u64, fault: Fault) -> Result<Vec<Check>, VerifyError> {
    let mut checks = Vec::new();

    let (k, eta, n) = (10usize, 0.4, 100_000usize);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let m = noise::uniform_matrix(k, eta)?;
    let noisy = noise::corrupt(&labels, &m, derive_seed(seed, &[5]))?;
    let flips = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count() as f64 + fault.0 * n as f64;
    let mut failures = Vec::new();
    if !within_sigmas(flips, n as f64, eta, 3.0) {
        failures.push(format!("K={k} η={eta} n={n}: {flips} flips"));
    }
    for class in 0..k {
        let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        let flipped = idx.iter().filter(|&&i| noisy[i] != class).count() as f64;
        if !within_sigmas(flipped, idx.len() as f64, eta, 4.0) {
            failures.push(format!("class {class}: {flipped} of {} flipped", idx.len()));
        }
    }
    checks.push(Check {
        name: "uniform flips".into(),
        cases: k + 1,
        detail: format!("{flips} of {n} flipped at η={eta} (3σ overall, 4σ per class)"),
        failures,
    });

    let (rho_pos, rho_neg) = (0.1, 0.3);
    let labels: Vec<usize> = (0..20_000).map(|i| i % 2).collect();
    let noisy = noise::corrupt(&labels, &noise::binary_cc_matrix(rho_pos, rho_neg)?, derive_seed(seed, &[6]))?;
    let mut failures = Vec::new();
    for (class, rate) in [(1usize, rho_pos), (0, rho_neg)] {
        let total = labels.iter().filter(|&&y| y == class).count() as f64;
        let flipped = labels.iter().zip(&noisy).filter(|(&a, &b)| a == class && b != class).count() as f64
            + fault.0 * total;
        if !within_sigmas(flipped, total, rate, 4.0) {
            failures.push(format!("class {class}: {flipped} of {total} flipped, expected rate {rate}"));
        }
    }
    checks.push(Check {
        name: "binary class-conditional flips".into(),
        cases: 2,
        detail: format!("rho_pos={rho_pos} rho_neg={rho_neg}"),
        failures,
    });

    let (x, y) = three_blobs(200, derive_seed(seed, &[7]));
    let m = noise::mahalanobis_matrix(&x, &y, 3, None)?;
    let mut failures = Vec::new();
    for j in 0..3 {
        let sum: f64 = m.row(j).iter().sum::<f64>() + fault.0;
        if (sum - 1.0).abs() > 1e-12 || m.row(j).iter().any(|&v| v < 0.0) {
            failures.push(format!("row {j} = {:?} sums to {sum}", m.row(j)));
        }
    }
    let diag = m.diagonal();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo != 0.5 || hi != 0.9 {
        failures.push(format!("diagonal {diag:?} does not span [0.5, 0.9]"));
    }
    if diag[2] != 0.9 {
        failures.push(format!("far blob keeps only {} of its labels", diag[2]));
    }
    checks.push(Check {
        name: "mahalanobis matrix on three blobs".into(),
        cases: 5,
        detail: format!("diagonal {:?}", diag.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()),
        failures,
    });
    Ok(checks)
}
