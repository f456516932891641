//! Chooses the NE parameter on a held-out shard of noisy training data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_trees::dataeng::{fit_model, train_test_split, tune_lambda, ModelSpec, DEFAULT_LAMBDA_GRID};
use robust_trees::noise::{corrupt, uniform_matrix};
use robust_trees::{Criterion, Dataset, FeatureMatrix};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2000;
    let mut data = Vec::with_capacity(n * 4);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..4).map(|_| rng.random_range(0..5) as f64).collect();
        labels.push(usize::from(row[0] + row[1] > 4.0));
        data.extend(row);
    }
    let full = Dataset::new(FeatureMatrix::new(n, 4, data).unwrap(), labels, vec!["neg".into(), "pos".into()]).unwrap();
    let (train, test) = train_test_split(&full, 0.8, 0).unwrap();
    let noisy = train.with_labels(corrupt(&train.labels, &uniform_matrix(2, 0.35).unwrap(), 1).unwrap());

    let spec = ModelSpec::tree();
    let tuned = tune_lambda(&noisy, &DEFAULT_LAMBDA_GRID, &spec, 0.2, 3).unwrap();
    for (lambda, acc) in &tuned.scores {
        println!("lambda={lambda:<5} validation accuracy={acc:.4}");
    }
    println!("chosen lambda = {}", tuned.best_lambda);

    for criterion in [Criterion::Entropy, Criterion::Ne { lambda: tuned.best_lambda }] {
        let model = fit_model(&spec, criterion, &noisy, 4).unwrap();
        println!(
            "{:<12} test accuracy={:.4} leaves={}",
            criterion.name(),
            model.accuracy(&test.features, &test.labels).unwrap(),
            model.stats().leaf_count
        );
    }
}
