//! Random forests and extremely randomized trees.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cart::{self, one, two, DecisionTreeModel, SplitMode, TreeHyper};
use super::{Criterion, MaxFeatures};
use crate::learners::{check_dims, check_training, ClassIndex};
use crate::rng;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestHyper {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "two")]
    pub min_samples_split: usize,
    #[serde(default = "one")]
    pub min_samples_leaf: usize,
    #[serde(default = "sqrt")]
    pub max_features: MaxFeatures,
    #[serde(default = "yes")]
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraTreesHyper {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default)]
    pub criterion: Criterion,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "two")]
    pub min_samples_split: usize,
    #[serde(default = "one")]
    pub min_samples_leaf: usize,
    #[serde(default)]
    pub max_features: MaxFeatures,
    #[serde(default)]
    pub bootstrap: bool,
}

fn default_trees() -> usize {
    100
}

fn sqrt() -> MaxFeatures {
    MaxFeatures::Sqrt
}

fn yes() -> bool {
    true
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: default_trees(),
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl Default for ExtraTreesHyper {
    fn default() -> Self {
        ExtraTreesHyper {
            n_trees: default_trees(),
            criterion: Criterion::Gini,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
        }
    }
}

impl ForestHyper {
    fn tree(&self, split_mode: SplitMode) -> TreeHyper {
        TreeHyper {
            criterion: self.criterion,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
            split_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        self.tree(SplitMode::Best).validate()
    }
}

impl ExtraTreesHyper {
    fn as_forest(&self) -> ForestHyper {
        ForestHyper {
            n_trees: self.n_trees,
            criterion: self.criterion,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            max_features: self.max_features,
            bootstrap: self.bootstrap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.as_forest().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<u32>,
    pub trees: Vec<DecisionTreeModel>,
    pub bootstrap: bool,
    pub seeds: Vec<u64>,
    /// Training rows each tree never saw; empty without bootstrap.
    pub out_of_bag: Vec<Vec<usize>>,
}

/// `n` draws with replacement from `0..n`, returned sorted.
pub fn bootstrap_sample(n: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::seeded(seed);
    let mut s: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
    s.sort_unstable();
    s
}

fn train_forest(x: &Matrix, y: &[u32], hyper: &ForestHyper, split_mode: SplitMode, seed: u64) -> Result<ForestModel> {
    check_training(x, y)?;
    hyper.validate()?;
    let index = ClassIndex::fit(y)?;
    let targets = index.encode(y)?;
    let tree_hyper = hyper.tree(split_mode);
    let n = x.rows();
    let mut trees = Vec::with_capacity(hyper.n_trees);
    let mut seeds = Vec::with_capacity(hyper.n_trees);
    let mut out_of_bag = Vec::with_capacity(hyper.n_trees);
    for t in 0..hyper.n_trees {
        let tree_seed = rng::derive_indexed(seed, t as u64);
        let samples = if hyper.bootstrap {
            let s = bootstrap_sample(n, rng::derive_seed(tree_seed, "bootstrap"));
            let mut seen = vec![false; n];
            for &i in &s {
                seen[i] = true;
            }
            out_of_bag.push((0..n).filter(|&i| !seen[i]).collect());
            s
        } else {
            out_of_bag.push(Vec::new());
            (0..n).collect()
        };
        trees.push(cart::build_tree_indexed(x, &targets, index.classes.clone(), None, samples, &tree_hyper, tree_seed)?);
        seeds.push(tree_seed);
    }
    Ok(ForestModel { classes: index.classes, trees, bootstrap: hyper.bootstrap, seeds, out_of_bag })
}

/// Bootstrap resamples with per-node feature subsampling.
pub fn train_random_forest(x: &Matrix, y: &[u32], hyper: &ForestHyper, seed: u64) -> Result<ForestModel> {
    train_forest(x, y, hyper, SplitMode::Best, seed)
}

/// Random thresholds; by default every tree sees the full sample and all
/// features.
pub fn train_extra_trees(x: &Matrix, y: &[u32], hyper: &ExtraTreesHyper, seed: u64) -> Result<ForestModel> {
    train_forest(x, y, &hyper.as_forest(), SplitMode::Random, seed)
}

impl ForestModel {
    /// Fraction of trees voting for each class. The argmax (lowest column on
    /// ties) is the majority vote with ties going to the smallest code.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let m = self.trees.first().map_or(0, |t| t.n_features);
        check_dims(m, x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        let share = 1.0 / self.trees.len() as f64;
        for i in 0..x.rows() {
            let row = x.row(i);
            let mut votes = vec![0usize; self.classes.len()];
            for t in &self.trees {
                votes[t.predict_index(row)] += 1;
            }
            for (o, v) in out.row_mut(i).iter_mut().zip(votes) {
                *o = v as f64 * share;
            }
        }
        Ok(out)
    }
}
