//! Fits a single tree on a noisy two-moons style dataset and prints its shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_trees::tree::{self, TreeParams};
use robust_trees::{Criterion, FeatureMatrix};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 400;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (x, y) = if class == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        rows.push([x + rng.random_range(-0.2..0.2), y + rng.random_range(-0.2..0.2)]);
        labels.push(class);
    }
    let x = FeatureMatrix::from_rows(&rows).unwrap();

    for criterion in [Criterion::Gini, Criterion::Misclassification, Criterion::Ne { lambda: 0.5 }] {
        let params = TreeParams { max_depth: Some(6), ..TreeParams::new(criterion) };
        let t = tree::fit(&x, &labels, 2, &params).unwrap();
        let stats = t.stats();
        println!(
            "{:<18} nodes={:<4} leaves={:<4} depth={} train_acc={:.3}",
            criterion.to_string(),
            stats.node_count,
            stats.leaf_count,
            stats.max_depth,
            t.accuracy(&x, &labels).unwrap()
        );
    }

    let t = tree::fit(&x, &labels, 2, &TreeParams { max_depth: Some(2), ..TreeParams::new(Criterion::Entropy) }).unwrap();
    let (class, dist) = t.predict(&[0.0, 1.0]);
    println!("\ndepth-2 entropy tree predicts class {class} with distribution {dist:?} at (0, 1)");
    println!("{}", serde_json::to_string_pretty(&t).unwrap());
}
