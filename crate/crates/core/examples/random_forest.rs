//! Compares a single tree with a random forest on a noisy multiclass problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_trees::forest::{self, ForestParams};
use robust_trees::noise::{corrupt, uniform_matrix};
use robust_trees::tree::{self, TreeParams};
use robust_trees::{Criterion, FeatureMatrix};

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (FeatureMatrix, Vec<usize>) {
    let mut data = Vec::with_capacity(n * 6);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let class = match (row[0] + row[1] > 0.0, row[2] > 0.3) {
            (true, true) => 0,
            (true, false) => 1,
            _ => 2,
        };
        data.extend(row);
        labels.push(class);
    }
    (FeatureMatrix::new(n, 6, data).unwrap(), labels)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (x_train, y_clean) = sample(&mut rng, 1500);
    let (x_test, y_test) = sample(&mut rng, 1000);
    let y_train = corrupt(&y_clean, &uniform_matrix(3, 0.3).unwrap(), 11).unwrap();

    for criterion in [Criterion::Entropy, Criterion::Misclassification, Criterion::Ne { lambda: 0.25 }] {
        let t = tree::fit(&x_train, &y_train, 3, &TreeParams::new(criterion)).unwrap();
        let params = ForestParams { n_trees: 50, ..ForestParams::new(TreeParams::new(criterion)) }.with_seed(3);
        let f = forest::fit(&x_train, &y_train, 3, &params).unwrap();
        println!(
            "{:<18} tree={:.3} ({} leaves)  forest={:.3} ({} leaves in total)",
            criterion.to_string(),
            t.accuracy(&x_test, &y_test).unwrap(),
            t.stats().leaf_count,
            f.accuracy(&x_test, &y_test).unwrap(),
            f.stats().leaf_count
        );
    }
}
