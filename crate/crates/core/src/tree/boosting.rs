//! SAMME AdaBoost over shallow CART trees and multinomial gradient boosting
//! over least-squares regression trees.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use super::regression::Growth;
use super::cart::{self, DecisionTreeModel, TreeHyper};
use super::regression::{self, Presorted, RegTreeParams, RegressionTree};
use crate::learners::{check_dims, check_training, ClassIndex};
use crate::{math, rng, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaBoostHyper {
    #[serde(default = "default_ada_rounds")]
    pub n_rounds: usize,
    /// Depth of each weak learner; 1 means stumps.
    #[serde(default = "default_stump_depth")]
    pub stump_depth: usize,
}

fn default_ada_rounds() -> usize {
    50
}

fn default_stump_depth() -> usize {
    1
}

impl Default for AdaBoostHyper {
    fn default() -> Self {
        AdaBoostHyper { n_rounds: default_ada_rounds(), stump_depth: default_stump_depth() }
    }
}

impl AdaBoostHyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 || self.stump_depth == 0 {
            return Err(Error::InvalidParameter("adaboost needs n_rounds >= 1 and stump_depth >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientBoostingHyper {
    #[serde(default = "default_gb_rounds")]
    pub n_rounds: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Depth limit for level-wise growth.
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default)]
    pub growth: Growth,
    /// Leaf budget for leaf-wise growth.
    #[serde(default = "default_leaves")]
    pub max_leaves: usize,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
}

fn default_gb_rounds() -> usize {
    100
}

fn default_lr() -> f64 {
    0.1
}

fn default_depth() -> usize {
    3
}

fn default_leaves() -> usize {
    8
}

fn default_min_leaf() -> usize {
    1
}

impl Default for GradientBoostingHyper {
    fn default() -> Self {
        GradientBoostingHyper {
            n_rounds: default_gb_rounds(),
            learning_rate: default_lr(),
            max_depth: default_depth(),
            growth: Growth::LevelWise,
            max_leaves: default_leaves(),
            min_samples_leaf: default_min_leaf(),
        }
    }
}

impl GradientBoostingHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be finite and >= 0".into()));
        }
        if self.max_leaves < 1 || self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("max_leaves and min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }

    fn tree_params(&self) -> RegTreeParams {
        match self.growth {
            Growth::LevelWise => RegTreeParams {
                growth: Growth::LevelWise,
                max_depth: self.max_depth,
                max_leaves: usize::MAX,
                min_samples_leaf: self.min_samples_leaf,
            },
            Growth::LeafWise => RegTreeParams {
                growth: Growth::LeafWise,
                max_depth: usize::MAX,
                max_leaves: self.max_leaves,
                min_samples_leaf: self.min_samples_leaf,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaStage {
    pub tree: DecisionTreeModel,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbStage {
    /// Column index of the class this tree adjusts.
    pub class: usize,
    pub tree: RegressionTree,
    /// Learning rate after any step-halving for this round.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ensemble {
    AdaboostSamme {
        stages: Vec<AdaStage>,
    },
    GradientBoosting {
        initial: Vec<f64>,
        learning_rate: f64,
        growth: Growth,
        stages: Vec<GbStage>,
        /// Mean training deviance before the first round and after each.
        deviance: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub ensemble: Ensemble,
    pub warnings: Vec<String>,
}

/// SAMME learner weight `ln((1−ε)/ε) + ln(K−1)`, with ε kept away from 0.
pub fn samme_alpha(error: f64, k: usize) -> f64 {
    let e = error.max(1e-10);
    math::ln((1.0 - e) / e) + math::ln(k as f64 - 1.0)
}

/// Multiply misclassified weights by `exp(alpha)` and renormalize.
pub fn samme_reweight(weights: &mut [f64], missed: &[bool], alpha: f64) {
    let boost = math::exp(alpha);
    for (w, &m) in weights.iter_mut().zip(missed) {
        if m {
            *w *= boost;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

pub fn train_adaboost(x: &Matrix, y: &[u32], hyper: &AdaBoostHyper, seed: u64) -> Result<BoostedModel> {
    check_training(x, y)?;
    hyper.validate()?;
    let index = ClassIndex::fit(y)?;
    let k = index.len();
    if k < 2 {
        return Err(Error::InsufficientData("adaboost needs at least two classes".into()));
    }
    let targets = index.encode(y)?;
    let n = x.rows();
    let tree_hyper = TreeHyper { max_depth: Some(hyper.stump_depth), ..TreeHyper::default() };
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();
    let mut warnings = Vec::new();
    let chance = 1.0 - 1.0 / k as f64;
    for t in 0..hyper.n_rounds {
        let tree = cart::build_tree_indexed(
            x,
            &targets,
            index.classes.clone(),
            Some(&weights),
            (0..n).collect(),
            &tree_hyper,
            rng::derive_indexed(seed, t as u64),
        )?;
        let missed: Vec<bool> = (0..n).map(|i| tree.predict_index(x.row(i)) != targets[i]).collect();
        let error: f64 = weights.iter().zip(&missed).filter(|(_, &m)| m).map(|(w, _)| w).sum();
        if error >= chance {
            if stages.is_empty() {
                warnings.push(alloc::format!(
                    "first weak learner has weighted error {error:.4} >= {chance:.4}; kept alone with weight 1"
                ));
                stages.push(AdaStage { tree, alpha: 1.0 });
            }
            break;
        }
        let alpha = samme_alpha(error, k);
        stages.push(AdaStage { tree, alpha });
        if error <= 0.0 {
            break;
        }
        samme_reweight(&mut weights, &missed, alpha);
    }
    Ok(BoostedModel { classes: index.classes, n_features: x.cols(), ensemble: Ensemble::AdaboostSamme { stages }, warnings })
}

fn mean_deviance(f: &Matrix, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = f.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + math::ln(row.iter().map(|v| math::exp(v - max)).sum::<f64>());
        total += lse - row[yi];
    }
    total / y.len() as f64
}

pub fn train_gradient_boosting(x: &Matrix, y: &[u32], hyper: &GradientBoostingHyper, _seed: u64) -> Result<BoostedModel> {
    check_training(x, y)?;
    hyper.validate()?;
    let index = ClassIndex::fit(y)?;
    let k = index.len();
    if k < 2 {
        return Err(Error::InsufficientData("gradient boosting needs at least two classes".into()));
    }
    let targets = index.encode(y)?;
    let n = x.rows();
    let mut counts = vec![0usize; k];
    for &c in &targets {
        counts[c] += 1;
    }
    let initial: Vec<f64> = counts.iter().map(|&c| math::ln(c as f64 / n as f64)).collect();
    let mut f = Matrix::zeros(n, k);
    for i in 0..n {
        f.row_mut(i).copy_from_slice(&initial);
    }
    let params = hyper.tree_params();
    let mut pre = Presorted::new(x);
    let mut deviance = vec![mean_deviance(&f, &targets)];
    let mut stages = Vec::with_capacity(hyper.n_rounds * k);
    let mut warnings = Vec::new();
    let mut floored = false;
    let mut halved = 0usize;
    let mut prob = vec![0.0; k];
    let mut residual = Matrix::zeros(k, n);
    let scale = (k as f64 - 1.0) / k as f64;

    for _ in 0..hyper.n_rounds {
        for i in 0..n {
            math::softmax_into(f.row(i), &mut prob);
            for c in 0..k {
                residual[(c, i)] = if targets[i] == c { 1.0 } else { 0.0 } - prob[c];
            }
        }
        let mut round = Vec::with_capacity(k);
        let mut update = Matrix::zeros(n, k);
        for c in 0..k {
            let r = residual.row(c);
            let tree = regression::fit(x, r, (0..n).collect(), &params, &mut pre, |s| {
                let num: f64 = s.iter().map(|&i| r[i]).sum();
                let den: f64 = s.iter().map(|&i| math::abs(r[i]) * (1.0 - math::abs(r[i]))).sum();
                if den < 1e-12 {
                    floored = true;
                }
                scale * num / den.max(1e-12)
            });
            for i in 0..n {
                update[(i, c)] = tree.predict_row(x.row(i));
            }
            round.push(tree);
        }

        // halve the step until the training deviance does not increase
        let prev = *deviance.last().unwrap_or(&f64::INFINITY);
        let mut step = hyper.learning_rate;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = f.clone();
            for (t, u) in trial.as_mut_slice().iter_mut().zip(update.as_slice()) {
                *t += step * u;
            }
            let dev = mean_deviance(&trial, &targets);
            if dev.is_finite() && dev <= prev {
                accepted = Some((trial, dev));
                break;
            }
            step *= 0.5;
            halved += 1;
        }
        let dev = match accepted {
            Some((trial, dev)) => {
                f = trial;
                dev
            }
            None => {
                step = 0.0;
                prev
            }
        };
        deviance.push(dev);
        for (c, tree) in round.into_iter().enumerate() {
            stages.push(GbStage { class: c, tree, weight: step });
        }
    }
    if floored {
        warnings.push("leaf denominator fell below 1e-12 and was floored".into());
    }
    if halved > 0 {
        warnings.push(alloc::format!("step size halved {halved} times to keep training deviance from rising"));
    }
    Ok(BoostedModel {
        classes: index.classes,
        n_features: x.cols(),
        ensemble: Ensemble::GradientBoosting {
            initial,
            learning_rate: hyper.learning_rate,
            growth: hyper.growth,
            stages,
            deviance,
        },
        warnings,
    })
}

impl BoostedModel {
    /// AdaBoost: normalized weighted votes. Gradient boosting: softmax of the
    /// additive class scores.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.n_features, x)?;
        let k = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), k);
        match &self.ensemble {
            Ensemble::AdaboostSamme { stages } => {
                let total: f64 = stages.iter().map(|s| s.alpha).sum();
                for i in 0..x.rows() {
                    let row = out.row_mut(i);
                    for s in stages {
                        row[s.tree.predict_index(x.row(i))] += s.alpha;
                    }
                    if total > 0.0 {
                        for v in row.iter_mut() {
                            *v /= total;
                        }
                    } else {
                        row.fill(1.0 / k as f64);
                    }
                }
            }
            Ensemble::GradientBoosting { initial, stages, .. } => {
                let mut score = vec![0.0; k];
                for i in 0..x.rows() {
                    score.copy_from_slice(initial);
                    for s in stages {
                        if s.weight != 0.0 {
                            score[s.class] += s.weight * s.tree.predict_row(x.row(i));
                        }
                    }
                    math::softmax_into(&score, out.row_mut(i));
                }
            }
        }
        Ok(out)
    }

    pub fn deviance_trace(&self) -> &[f64] {
        match &self.ensemble {
            Ensemble::GradientBoosting { deviance, .. } => deviance,
            Ensemble::AdaboostSamme { .. } => &[],
        }
    }

    pub fn n_stages(&self) -> usize {
        match &self.ensemble {
            Ensemble::AdaboostSamme { stages } => stages.len(),
            Ensemble::GradientBoosting { stages, .. } => stages.len(),
        }
    }
}
