//! Greedy recursive-partition learner.
//!
//! At every node all `(feature, threshold)` candidates are scored and the
//! node is split on the best one. Growth stops at pure nodes, at the depth
//! limit, when no candidate leaves `min_samples_leaf` samples on both sides,
//! or when the best risk reduction is not positive.

use crate::impurity::{self, argmax_lowest, ClassHistogram, Criterion, ImpurityError};
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("cannot fit on an empty training set")]
    Empty,
    #[error("{labels} labels for {rows} feature rows")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {label} at row {row} is outside 0..{n_classes}")]
    LabelOutOfRange { row: usize, label: usize, n_classes: usize },
    #[error(transparent)]
    Features(#[from] MatrixError),
    #[error(transparent)]
    Criterion(#[from] ImpurityError),
    #[error("invalid tree parameter: {0}")]
    Params(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("input has {found} features, model expects {expected}")]
    FeatureCount { found: usize, expected: usize },
}

/// Routes a sample left iff `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub hist: ClassHistogram,
    pub distribution: Vec<f64>,
    pub predicted_class: usize,
}

impl Leaf {
    fn new(hist: ClassHistogram) -> Result<Self, ModelError> {
        let distribution = hist
            .probabilities()
            .ok_or_else(|| ModelError::Malformed("leaf with no samples".into()))?;
        let predicted_class = argmax_lowest(&distribution);
        Ok(Self { hist, distribution, predicted_class })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { rule: SplitRule, left: usize, right: usize, hist: ClassHistogram },
    Leaf(Leaf),
}

impl Node {
    pub fn hist(&self) -> &ClassHistogram {
        match self {
            Node::Split { hist, .. } => hist,
            Node::Leaf(leaf) => &leaf.hist,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows without a depth limit.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_samples_leaf")]
    pub min_samples_leaf: usize,
    /// Number of non-constant features drawn at random for each split; `None` uses all.
    #[serde(default)]
    pub feature_subsample: Option<usize>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_min_samples_leaf() -> usize {
    1
}

impl TreeParams {
    pub fn new(criterion: Criterion) -> Self {
        Self { criterion, max_depth: None, min_samples_leaf: 1, feature_subsample: None, rng_seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self, n_features: usize) -> Result<(), FitError> {
        self.criterion.validate()?;
        if self.min_samples_leaf == 0 {
            return Err(FitError::Params("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(FitError::Params("max_depth must be positive".into()));
        }
        if let Some(m) = self.feature_subsample {
            if m == 0 || m > n_features {
                return Err(FitError::Params(format!(
                    "feature_subsample must be in 1..={n_features}, got {m}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub node_count: usize,
    pub leaf_count: usize,
    pub max_depth: usize,
}

/// A trained tree. Node 0 is the root; children always have larger ids
/// than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeRepr", try_from = "TreeRepr")]
pub struct Tree {
    criterion: Criterion,
    n_classes: usize,
    n_features: usize,
    nodes: Vec<Node>,
}

impl Tree {
    /// Assembles a tree from explicit nodes, checking its structure.
    pub fn from_nodes(
        criterion: Criterion,
        n_classes: usize,
        n_features: usize,
        nodes: Vec<Node>,
    ) -> Result<Self, ModelError> {
        if nodes.is_empty() {
            return Err(ModelError::Malformed("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if node.hist().n_classes() != n_classes {
                return Err(ModelError::Malformed(format!("node {id} has the wrong class count")));
            }
            if let Node::Split { rule, left, right, hist } = node {
                if rule.feature >= n_features {
                    return Err(ModelError::Malformed(format!("node {id} splits on missing feature")));
                }
                for &child in [left, right] {
                    if child <= id || child >= nodes.len() {
                        return Err(ModelError::Malformed(format!("node {id} has bad child {child}")));
                    }
                    parents[child] += 1;
                }
                let merged = nodes[*left].hist().merged(nodes[*right].hist());
                if merged.as_ref() != Ok(hist) {
                    return Err(ModelError::Malformed(format!("children of node {id} do not partition it")));
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(ModelError::Malformed("nodes do not form a single tree".into()));
        }
        Ok(Self { criterion, n_classes, n_features, nodes })
    }

    pub fn criterion(&self) -> &Criterion {
        &self.criterion
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Split { .. } => None,
        })
    }

    /// Leaf reached by `x`.
    ///
    /// Panics if `x` is shorter than the number of features used by a split.
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { rule, left, right, .. } => {
                    id = if x[rule.feature] <= rule.threshold { *left } else { *right };
                }
                Node::Leaf(leaf) => return leaf,
            }
        }
    }

    /// Predicted class and the leaf's label distribution.
    pub fn predict(&self, x: &[f64]) -> (usize, &[f64]) {
        let leaf = self.leaf_for(x);
        (leaf.predicted_class, &leaf.distribution)
    }

    pub fn predict_batch(&self, features: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        self.check_features(features)?;
        Ok(features.rows().map(|x| self.leaf_for(x).predicted_class).collect())
    }

    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[usize]) -> Result<f64, ModelError> {
        Ok(accuracy(&self.predict_batch(features)?, labels))
    }

    pub(crate) fn check_features(&self, features: &FeatureMatrix) -> Result<(), ModelError> {
        if features.n_cols() != self.n_features {
            return Err(ModelError::FeatureCount { found: features.n_cols(), expected: self.n_features });
        }
        Ok(())
    }

    pub fn stats(&self) -> TreeStats {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut leaf_count = 0;
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { left, right, .. } => {
                    depth[*left] = depth[id] + 1;
                    depth[*right] = depth[id] + 1;
                }
                Node::Leaf(_) => leaf_count += 1,
            }
        }
        TreeStats {
            node_count: self.nodes.len(),
            leaf_count,
            max_depth: depth.into_iter().max().unwrap_or(0),
        }
    }
}

pub(crate) fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len() as f64
}

/// Checks shapes, finiteness and label range shared by every learner.
pub(crate) fn validate_training_data(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
) -> Result<(), FitError> {
    if features.n_rows() == 0 || features.n_cols() == 0 {
        return Err(FitError::Empty);
    }
    if features.n_rows() != labels.len() {
        return Err(FitError::LengthMismatch { rows: features.n_rows(), labels: labels.len() });
    }
    if n_classes < 2 {
        return Err(ImpurityError::TooFewClasses(n_classes).into());
    }
    features.check_finite()?;
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
        return Err(FitError::LabelOutOfRange { row, label, n_classes });
    }
    Ok(())
}

/// Fits a tree on `n` rows; impurities are weighted by `|D| = n`.
pub fn fit(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &TreeParams,
) -> Result<Tree, FitError> {
    validate_training_data(features, labels, n_classes)?;
    params.validate(features.n_cols())?;
    let mut builder = Builder {
        columns: features.to_column_major(),
        n_rows: features.n_rows(),
        n_features: features.n_cols(),
        labels,
        n_classes,
        params,
        rng: rng_from_seed(params.rng_seed),
        scratch: Vec::with_capacity(features.n_rows()),
    };
    let nodes = builder.grow();
    Ok(Tree { criterion: params.criterion, n_classes, n_features: features.n_cols(), nodes })
}

struct Candidate {
    rule: SplitRule,
    score: f64,
}

struct Builder<'a> {
    columns: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    labels: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    scratch: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn grow(&mut self) -> Vec<Node> {
        let mut nodes: Vec<Option<Node>> = vec![None];
        let mut stack = vec![(0usize, (0..self.n_rows).collect::<Vec<_>>(), 0usize)];
        while let Some((id, rows, depth)) = stack.pop() {
            let hist = self.histogram(&rows);
            let candidate = if self.should_try_split(&hist, depth) { self.best_split(&rows, &hist) } else { None };
            match candidate {
                Some(c) if c.score > self.params.criterion.halting_slack() => {
                    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                        .iter()
                        .partition(|&&i| self.value(c.rule.feature, i) <= c.rule.threshold);
                    let (left, right) = (nodes.len(), nodes.len() + 1);
                    nodes.push(None);
                    nodes.push(None);
                    nodes[id] = Some(Node::Split { rule: c.rule, left, right, hist });
                    stack.push((right, right_rows, depth + 1));
                    stack.push((left, left_rows, depth + 1));
                }
                _ => {
                    let leaf = Leaf::new(hist).expect("tree nodes are never empty");
                    nodes[id] = Some(Node::Leaf(leaf));
                }
            }
        }
        nodes.into_iter().map(|n| n.expect("every allocated node is filled")).collect()
    }

    fn value(&self, feature: usize, row: usize) -> f64 {
        self.columns[feature * self.n_rows + row]
    }

    fn histogram(&self, rows: &[usize]) -> ClassHistogram {
        let mut hist = ClassHistogram::zeros(self.n_classes).expect("n_classes >= 2");
        for &i in rows {
            hist.add(self.labels[i]);
        }
        hist
    }

    fn should_try_split(&self, hist: &ClassHistogram, depth: usize) -> bool {
        !hist.is_pure()
            && self.params.max_depth.is_none_or(|d| depth < d)
            && hist.total() >= 2 * self.params.min_samples_leaf as u64
    }

    /// Features to search at a node. With subsampling, features are drawn in
    /// random order and those constant on `rows` are skipped without counting,
    /// until `m` non-constant ones are found. The result is sorted so that the
    /// lower-feature tie rule does not depend on the draw order.
    fn candidate_features(&mut self, rows: &[usize]) -> Vec<usize> {
        match self.params.feature_subsample {
            Some(m) if m < self.n_features => {
                let mut order: Vec<usize> = (0..self.n_features).collect();
                order.shuffle(&mut self.rng);
                let mut f: Vec<usize> =
                    order.into_iter().filter(|&j| !self.is_constant(j, rows)).take(m).collect();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        }
    }

    fn is_constant(&self, feature: usize, rows: &[usize]) -> bool {
        let first = self.value(feature, rows[0]);
        rows.iter().all(|&i| self.value(feature, i) == first)
    }

    /// Best candidate by score; ties go to the lower feature, then the lower threshold.
    fn best_split(&mut self, rows: &[usize], parent: &ClassHistogram) -> Option<Candidate> {
        let criterion = self.params.criterion;
        let min_leaf = self.params.min_samples_leaf as u64;
        let dataset_size = self.n_rows as u64;
        let parent_counts = (parent.counts(), parent.total());
        let mut left = vec![0u64; self.n_classes];
        let mut right = vec![0u64; self.n_classes];
        let mut best: Option<Candidate> = None;
        let mut scratch = std::mem::take(&mut self.scratch);

        for feature in self.candidate_features(rows) {
            scratch.clear();
            scratch.extend(rows.iter().map(|&i| (self.value(feature, i), self.labels[i])));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            for j in 0..scratch.len() - 1 {
                left[scratch[j].1] += 1;
                let (lo, hi) = (scratch[j].0, scratch[j + 1].0);
                if lo == hi {
                    continue;
                }
                let n_left = j as u64 + 1;
                let n_right = parent.total() - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                for (r, (&p, &l)) in right.iter_mut().zip(parent.counts().iter().zip(&left)) {
                    *r = p - l;
                }
                let score = impurity::split_score_counts(
                    &criterion,
                    parent_counts,
                    (&left, n_left),
                    (&right, n_right),
                    dataset_size,
                );
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(Candidate { rule: SplitRule { feature, threshold: midpoint(lo, hi) }, score });
                }
            }
        }
        self.scratch = scratch;
        best
    }
}

/// Threshold strictly below `hi` and at least `lo`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * lo + 0.5 * hi;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// On-disk node layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRepr {
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Split,
    Leaf,
}

/// On-disk tree layout: `{criterion, K, n_features, nodes}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRepr {
    pub criterion: Criterion,
    #[serde(rename = "K")]
    pub n_classes: usize,
    pub n_features: usize,
    pub nodes: Vec<NodeRepr>,
}

impl From<Tree> for TreeRepr {
    fn from(tree: Tree) -> Self {
        let nodes = tree
            .nodes
            .into_iter()
            .map(|node| match node {
                Node::Split { rule, left, right, hist } => NodeRepr {
                    kind: NodeKind::Split,
                    feature: Some(rule.feature),
                    threshold: Some(rule.threshold),
                    left: Some(left),
                    right: Some(right),
                    counts: hist.counts().to_vec(),
                },
                Node::Leaf(leaf) => NodeRepr {
                    kind: NodeKind::Leaf,
                    feature: None,
                    threshold: None,
                    left: None,
                    right: None,
                    counts: leaf.hist.counts().to_vec(),
                },
            })
            .collect();
        TreeRepr { criterion: tree.criterion, n_classes: tree.n_classes, n_features: tree.n_features, nodes }
    }
}

impl TryFrom<TreeRepr> for Tree {
    type Error = ModelError;

    fn try_from(repr: TreeRepr) -> Result<Self, Self::Error> {
        let malformed = |id: usize, what: &str| ModelError::Malformed(format!("node {id}: {what}"));
        let mut nodes = Vec::with_capacity(repr.nodes.len());
        for (id, n) in repr.nodes.into_iter().enumerate() {
            let hist = ClassHistogram::new(n.counts).map_err(|e| malformed(id, &e.to_string()))?;
            nodes.push(match n.kind {
                NodeKind::Split => {
                    let missing = || malformed(id, "split without feature, threshold or children");
                    Node::Split {
                        rule: SplitRule {
                            feature: n.feature.ok_or_else(missing)?,
                            threshold: n.threshold.ok_or_else(missing)?,
                        },
                        left: n.left.ok_or_else(missing)?,
                        right: n.right.ok_or_else(missing)?,
                        hist,
                    }
                }
                NodeKind::Leaf => Node::Leaf(Leaf::new(hist)?),
            });
        }
        repr.criterion.validate().map_err(|e| ModelError::Malformed(e.to_string()))?;
        Tree::from_nodes(repr.criterion, repr.n_classes, repr.n_features, nodes)
    }
}
