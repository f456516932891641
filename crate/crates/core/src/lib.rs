//! Decision trees and random forests grown by greedy risk minimization, with
//! split criteria derived from loss functions that tolerate label noise.
//!
//! The crate is organised around the node impurity: the minimum partial
//! empirical risk a constant prediction can achieve on a node.
//!
//! - [`impurity`]: closed-form impurities, risk reduction, optimal constant
//!   predictions and distribution losses.
//! - [`tree`] / [`forest`]: the learners and their JSON model format.
//! - [`noise`]: label-corruption models and the majority-preservation bound.
//! - [`oracle`]: brute-force minimizers used to check the closed forms.
//! - [`dataeng`]: dataset loading, splits, λ tuning and experiment grids.
//! - [`cli`]: the command-line front end used by the `robust-trees` binary.

pub mod cli;
pub mod dataeng;
pub mod forest;
pub mod impurity;
pub mod matrix;
pub mod noise;
pub mod oracle;
pub mod rng;
pub mod tree;

pub use dataeng::{Dataset, ExperimentConfig, ResultRecord};
pub use forest::{Forest, ForestParams};
pub use impurity::{ClassHistogram, Criterion, WeightedImpurity};
pub use matrix::FeatureMatrix;
pub use noise::{NoiseSpec, TransitionMatrix};
pub use tree::{Tree, TreeParams};
