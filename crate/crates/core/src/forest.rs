//! Random forests: bagged trees with per-split feature subsampling,
//! predicting by the mean of the leaf label distributions.

use crate::impurity::argmax_lowest;
use crate::matrix::FeatureMatrix;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tree::{self, FitError, ModelError, Tree, TreeParams, TreeStats};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("forest has no trees")]
    Empty,
    #[error("trees disagree on the number of classes")]
    MixedClasses,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    /// Per-tree settings. When `feature_subsample` is `None` each split
    /// draws `ceil(sqrt(d))` features.
    pub tree: TreeParams,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_n_trees() -> usize {
    100
}

fn default_bootstrap() -> bool {
    true
}

impl ForestParams {
    pub fn new(tree: TreeParams) -> Self {
        Self { n_trees: 100, tree, bootstrap: true, rng_seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }
}

/// `ceil(sqrt(d))`, at least 1.
pub fn default_feature_subsample(n_features: usize) -> usize {
    ((n_features as f64).sqrt().ceil() as usize).clamp(1, n_features.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    #[serde(rename = "K")]
    n_classes: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>) -> Result<Self, ForestError> {
        let n_classes = trees.first().ok_or(ForestError::Empty)?.n_classes();
        if trees.iter().any(|t| t.n_classes() != n_classes) {
            return Err(ForestError::MixedClasses);
        }
        Ok(Self { n_classes, trees })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Mean leaf distribution over all trees and its argmax (lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>), ForestError> {
        if self.trees.is_empty() {
            return Err(ForestError::Empty);
        }
        let mut mean = vec![0.0; self.n_classes];
        for tree in &self.trees {
            for (m, p) in mean.iter_mut().zip(tree.predict(x).1) {
                *m += p;
            }
        }
        let n = self.trees.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok((argmax_lowest(&mean), mean))
    }

    pub fn predict_batch(&self, features: &FeatureMatrix) -> Result<Vec<usize>, ForestError> {
        for t in &self.trees {
            t.check_features(features)?;
        }
        features.rows().map(|x| self.predict(x).map(|(c, _)| c)).collect()
    }

    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[usize]) -> Result<f64, ForestError> {
        Ok(tree::accuracy(&self.predict_batch(features)?, labels))
    }

    /// Node and leaf counts summed over trees; depth is the deepest tree.
    pub fn stats(&self) -> TreeStats {
        self.trees.iter().map(Tree::stats).fold(
            TreeStats { node_count: 0, leaf_count: 0, max_depth: 0 },
            |acc, s| TreeStats {
                node_count: acc.node_count + s.node_count,
                leaf_count: acc.leaf_count + s.leaf_count,
                max_depth: acc.max_depth.max(s.max_depth),
            },
        )
    }
}

/// Trains `n_trees` trees in parallel on the current rayon pool.
///
/// Tree `i` draws its bootstrap sample and split features from seeds derived
/// from `(rng_seed, i)`, so the result does not depend on the thread count.
pub fn fit(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<Forest, ForestError> {
    if params.n_trees == 0 {
        return Err(FitError::Params("n_trees must be at least 1".into()).into());
    }
    tree::validate_training_data(features, labels, n_classes)?;
    let n = features.n_rows();
    let subsample = params.tree.feature_subsample.unwrap_or_else(|| default_feature_subsample(features.n_cols()));

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let tree_seed = derive_seed(params.rng_seed, &[i as u64]);
            let tree_params = TreeParams { feature_subsample: Some(subsample), rng_seed: tree_seed, ..params.tree.clone() };
            if params.bootstrap {
                let mut rng = rng_from_seed(derive_seed(tree_seed, &[u64::MAX]));
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let x = features.select_rows(&rows);
                let y: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
                tree::fit(&x, &y, n_classes, &tree_params)
            } else {
                tree::fit(features, labels, n_classes, &tree_params)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Forest::from_trees(trees)
}
