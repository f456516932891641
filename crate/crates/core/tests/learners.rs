use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_trees::forest::{self, ForestParams};
use robust_trees::impurity::{impurity, ClassHistogram, Criterion};
use robust_trees::tree::{self, Node, Tree, TreeParams};
use robust_trees::FeatureMatrix;

const CRITERIA: [Criterion; 8] = [
    Criterion::Gini,
    Criterion::Entropy,
    Criterion::Misclassification,
    Criterion::Mae,
    Criterion::Gce { q: 0.5 },
    Criterion::Ne { lambda: 0.5 },
    Criterion::Ne { lambda: 0.0 },
    Criterion::Twoing,
];

fn random_data(seed: u64, n: usize, d: usize, k: usize) -> (FeatureMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..6) as f64).collect();
    let labels = (0..n)
        .map(|i| {
            let signal = (data[i * d] as usize) % k;
            if rng.random_bool(0.7) { signal } else { rng.random_range(0..k) }
        })
        .collect();
    (FeatureMatrix::new(n, d, data).unwrap(), labels)
}

/// Routes every training row and rebuilds each node's histogram from scratch.
fn routed_histograms(tree: &Tree, x: &FeatureMatrix, y: &[usize]) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; tree.n_classes()]; tree.nodes().len()];
    for (row, &label) in x.rows().zip(y) {
        let mut id = 0;
        loop {
            counts[id][label] += 1;
            match &tree.nodes()[id] {
                Node::Split { rule, left, right, .. } => {
                    id = if row[rule.feature] <= rule.threshold { *left } else { *right };
                }
                Node::Leaf(_) => break,
            }
        }
    }
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leaves_partition_the_training_set(seed in any::<u64>(), n in 2usize..80, d in 1usize..4, k in 2usize..4, c in 0usize..8) {
        let (x, y) = random_data(seed, n, d, k);
        let t = tree::fit(&x, &y, k, &TreeParams::new(CRITERIA[c])).unwrap();
        let routed = routed_histograms(&t, &x, &y);
        for (node, counts) in t.nodes().iter().zip(&routed) {
            prop_assert_eq!(node.hist().counts(), counts.as_slice());
        }
        let leaf_total: u64 = t.leaves().map(|l| l.hist.total()).sum();
        prop_assert_eq!(leaf_total, n as u64);
        for node in t.nodes() {
            if let Node::Split { left, right, hist, .. } = node {
                prop_assert!(left > &0 && right > &0);
                let merged = t.nodes()[*left].hist().merged(t.nodes()[*right].hist()).unwrap();
                prop_assert_eq!(&merged, hist);
            }
        }
    }

    #[test]
    fn splits_never_increase_risk(seed in any::<u64>(), n in 2usize..80, k in 2usize..4, c in 0usize..8) {
        let (x, y) = random_data(seed, n, 2, k);
        let criterion = CRITERIA[c];
        let t = tree::fit(&x, &y, k, &TreeParams::new(criterion)).unwrap();
        let risk = |h: &ClassHistogram| impurity(&criterion, h, n as u64).unwrap().value;
        for node in t.nodes() {
            if let Node::Split { left, right, hist, .. } = node {
                let children = risk(t.nodes()[*left].hist()) + risk(t.nodes()[*right].hist());
                prop_assert!(children <= risk(hist) + 1e-12);
            }
        }
        let leaf_risk: f64 = t.leaves().map(|l| risk(&l.hist)).sum();
        prop_assert!(leaf_risk <= risk(t.nodes()[0].hist()) + 1e-12);
    }

    #[test]
    fn size_limits_hold(seed in any::<u64>(), n in 2usize..80, depth in 1usize..4, leaf in 1usize..6) {
        let (x, y) = random_data(seed, n, 3, 3);
        let params = TreeParams { max_depth: Some(depth), min_samples_leaf: leaf, ..TreeParams::new(Criterion::Entropy) };
        let t = tree::fit(&x, &y, 3, &params).unwrap();
        prop_assert!(t.stats().max_depth <= depth);
        if t.nodes().len() > 1 {
            prop_assert!(t.leaves().all(|l| l.hist.total() >= leaf as u64));
        }
    }

    #[test]
    fn distinct_points_are_fit_exactly(seed in any::<u64>(), n in 2usize..60, k in 2usize..5, c in prop::sample::select(vec![0usize, 1, 4, 5, 6])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let x = FeatureMatrix::from_column(&xs);
        let t = tree::fit(&x, &y, k, &TreeParams::new(CRITERIA[c])).unwrap();
        prop_assert_eq!(t.accuracy(&x, &y).unwrap(), 1.0);
    }
}

#[test]
fn fitting_is_deterministic() {
    let (x, y) = random_data(11, 300, 4, 3);
    for criterion in CRITERIA {
        let params = TreeParams { feature_subsample: Some(2), ..TreeParams::new(criterion) }.with_seed(5);
        assert_eq!(tree::fit(&x, &y, 3, &params).unwrap(), tree::fit(&x, &y, 3, &params).unwrap());
    }
    let params = ForestParams { n_trees: 12, ..ForestParams::new(TreeParams::new(Criterion::Gini)) }.with_seed(9);
    assert_eq!(forest::fit(&x, &y, 3, &params).unwrap(), forest::fit(&x, &y, 3, &params).unwrap());
}

#[test]
fn trees_round_trip_through_json() {
    let (x, y) = random_data(3, 200, 3, 3);
    for criterion in CRITERIA {
        let t = tree::fit(&x, &y, 3, &TreeParams::new(criterion)).unwrap();
        let back: Tree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}

#[test]
fn single_full_tree_forest_matches_a_tree() {
    let (x, y) = random_data(21, 250, 4, 3);
    for criterion in CRITERIA {
        let tree_params = TreeParams { feature_subsample: Some(4), ..TreeParams::new(criterion) };
        let params = ForestParams { n_trees: 1, bootstrap: false, ..ForestParams::new(tree_params) }.with_seed(4);
        let f = forest::fit(&x, &y, 3, &params).unwrap();
        let t = tree::fit(&x, &y, 3, &TreeParams::new(criterion)).unwrap();
        assert_eq!(f.trees()[0].nodes(), t.nodes(), "{criterion:?}");
        assert_eq!(f.predict_batch(&x).unwrap(), t.predict_batch(&x).unwrap());
    }
}

#[test]
fn forest_does_not_depend_on_thread_count() {
    let (x, y) = random_data(8, 400, 5, 3);
    let params = ForestParams { n_trees: 24, ..ForestParams::new(TreeParams::new(Criterion::Ne { lambda: 0.25 })) }
        .with_seed(17);
    let fit_with = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| forest::fit(&x, &y, 3, &params).unwrap())
    };
    assert_eq!(fit_with(1), fit_with(8));
}

#[test]
fn bad_inputs_are_rejected() {
    let (x, y) = random_data(1, 10, 2, 2);
    assert!(tree::fit(&x, &y[..9], 2, &TreeParams::new(Criterion::Gini)).is_err());
    assert!(tree::fit(&x, &[2; 10], 2, &TreeParams::new(Criterion::Gini)).is_err());
    assert!(tree::fit(&x, &y, 2, &TreeParams::new(Criterion::Ne { lambda: 1.5 })).is_err());
    assert!(tree::fit(&x, &y, 2, &TreeParams::new(Criterion::Gce { q: -1.0 })).is_err());
    let nan = FeatureMatrix::new(1, 1, vec![f64::NAN]).unwrap();
    assert!(tree::fit(&nan, &[0], 2, &TreeParams::new(Criterion::Gini)).is_err());
    let params = TreeParams { feature_subsample: Some(3), ..TreeParams::new(Criterion::Gini) };
    assert!(tree::fit(&x, &y, 2, &params).is_err());
    let params = ForestParams { n_trees: 0, ..ForestParams::new(TreeParams::new(Criterion::Gini)) };
    assert!(forest::fit(&x, &y, 2, &params).is_err());
}
