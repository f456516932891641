//! Shows that conservative criteria refuse to split a node whose majority
//! class survives in every child, while entropy keeps splitting.

use robust_trees::oracle::exhaustive_early_stop_check;
use robust_trees::tree::{self, TreeParams};
use robust_trees::{Criterion, FeatureMatrix};

fn main() {
    // Class 0 is the majority on both sides of every threshold.
    let xs: Vec<f64> = (0..12).map(f64::from).collect();
    let labels = vec![0, 0, 1, 0, 0, 2, 0, 0, 1, 0, 2, 0];
    let x = FeatureMatrix::from_column(&xs);

    for criterion in [
        Criterion::Misclassification,
        Criterion::Mae,
        Criterion::Ne { lambda: 1.0 },
        Criterion::Entropy,
        Criterion::Gini,
    ] {
        let report = exhaustive_early_stop_check(&x, &labels, 3, &criterion).unwrap();
        let fitted = tree::fit(&x, &labels, 3, &TreeParams::new(criterion)).unwrap();
        println!(
            "{:<18} halts={:<5} majority_preserved={:<5} splits_checked={:<3} fitted_nodes={}",
            criterion.to_string(),
            report.halts,
            report.majority_preserved,
            report.n_splits,
            fitted.stats().node_count
        );
    }
}
