//! Classifier families behind one contract, plus the tagged hyperparameter
//! spec the framework uses to select and train them.

pub mod knn;
pub mod mlp;
pub mod naive_bayes;
pub mod softmax;
pub mod svm;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tree::boosting::{self, AdaBoostHyper, BoostedModel, GradientBoostingHyper};
use crate::tree::cart::{self, DecisionTreeModel, TreeHyper};
use crate::tree::forest::{self, ExtraTreesHyper, ForestHyper, ForestModel};
use crate::{math, Error, Matrix, Result};

pub use knn::{KnnHyper, KnnModel};
pub use mlp::{MlpHyper, MlpModel};
pub use naive_bayes::{GaussianNbModel, GnbHyper};
pub use softmax::{SoftmaxHyper, SoftmaxRegressionModel};
pub use svm::{KernelSpec, SvmHyper, SvmModel};

/// Shared prediction contract. Class codes are returned in ascending order by
/// `classes`, and probability columns follow that order.
pub trait Classifier {
    fn classes(&self) -> &[u32];

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;

    fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        let p = self.predict_proba(x)?;
        let classes = self.classes();
        Ok(p.iter_rows().map(|r| classes[math::argmax(r)]).collect())
    }
}

/// Sorted distinct class codes and the code → column lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassIndex {
    pub classes: Vec<u32>,
}

impl ClassIndex {
    pub fn fit(y: &[u32]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty);
        }
        let mut classes = y.to_vec();
        classes.sort_unstable();
        classes.dedup();
        Ok(ClassIndex { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn position(&self, code: u32) -> Result<usize> {
        self.classes.binary_search(&code).map_err(|_| Error::UnknownLabel(code))
    }

    pub fn encode(&self, y: &[u32]) -> Result<Vec<usize>> {
        y.iter().map(|&c| self.position(c)).collect()
    }
}

pub(crate) fn check_dims(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.cols() });
    }
    Ok(())
}

pub(crate) fn check_training(x: &Matrix, y: &[u32]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(Error::Empty);
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Model family plus hyperparameters, tagged by `family` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    LogisticRegression(SoftmaxHyper),
    GaussianNb(GnbHyper),
    Svm(SvmHyper),
    NeuralNetwork(MlpHyper),
    Knn(KnnHyper),
    DecisionTree(TreeHyper),
    RandomForest(ForestHyper),
    ExtraTrees(ExtraTreesHyper),
    Adaboost(AdaBoostHyper),
    GradientBoosting(GradientBoostingHyper),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::DecisionTree(TreeHyper::default())
    }
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::LogisticRegression(_) => "logistic_regression",
            ModelSpec::GaussianNb(_) => "gaussian_nb",
            ModelSpec::Svm(_) => "svm",
            ModelSpec::NeuralNetwork(_) => "neural_network",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::DecisionTree(_) => "decision_tree",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::ExtraTrees(_) => "extra_trees",
            ModelSpec::Adaboost(_) => "adaboost",
            ModelSpec::GradientBoosting(_) => "gradient_boosting",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(&self) -> String {
        let base = match self {
            ModelSpec::LogisticRegression(_) => "Logistic Regression",
            ModelSpec::GaussianNb(_) => "Gaussian NB",
            ModelSpec::Svm(hyper) => {
                return alloc::format!("SVM ({})", hyper.kernel.kind_name());
            }
            ModelSpec::NeuralNetwork(_) => "Neural Network",
            ModelSpec::Knn(_) => "K-Nearest Neighbors",
            ModelSpec::DecisionTree(_) => "Decision Tree",
            ModelSpec::RandomForest(_) => "Random Forest",
            ModelSpec::ExtraTrees(_) => "Extra Trees",
            ModelSpec::Adaboost(_) => "AdaBoost",
            ModelSpec::GradientBoosting(hyper) => match hyper.growth {
                boosting::Growth::LevelWise => "Gradient Boosting",
                boosting::Growth::LeafWise => "Gradient Boosting (leaf-wise)",
            },
        };
        String::from(base)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::LogisticRegression(hyper) => {
                if !(hyper.lr > 0.0 && hyper.lr.is_finite()) || hyper.l2 < 0.0 {
                    return Err(Error::InvalidParameter("logistic regression needs lr > 0 and l2 >= 0".into()));
                }
            }
            ModelSpec::GaussianNb(_) => {}
            ModelSpec::Svm(hyper) => hyper.validate()?,
            ModelSpec::NeuralNetwork(hyper) => {
                if hyper.hidden_units == 0 {
                    return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
                }
            }
            ModelSpec::Knn(hyper) => {
                if hyper.k == 0 {
                    return Err(Error::InvalidParameter("k must be >= 1".into()));
                }
            }
            ModelSpec::DecisionTree(hyper) => hyper.validate()?,
            ModelSpec::RandomForest(hyper) => hyper.validate()?,
            ModelSpec::ExtraTrees(hyper) => hyper.validate()?,
            ModelSpec::Adaboost(hyper) => hyper.validate()?,
            ModelSpec::GradientBoosting(hyper) => hyper.validate()?,
        }
        Ok(())
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    LogisticRegression(SoftmaxRegressionModel),
    GaussianNb(GaussianNbModel),
    Svm(SvmModel),
    NeuralNetwork(MlpModel),
    Knn(KnnModel),
    DecisionTree(DecisionTreeModel),
    RandomForest(ForestModel),
    ExtraTrees(ForestModel),
    Adaboost(BoostedModel),
    GradientBoosting(BoostedModel),
}

impl TrainedModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedModel::LogisticRegression(m) => m,
            TrainedModel::GaussianNb(m) => m,
            TrainedModel::Svm(m) => m,
            TrainedModel::NeuralNetwork(m) => m,
            TrainedModel::Knn(m) => m,
            TrainedModel::DecisionTree(m) => m,
            TrainedModel::RandomForest(m) | TrainedModel::ExtraTrees(m) => m,
            TrainedModel::Adaboost(m) | TrainedModel::GradientBoosting(m) => m,
        }
    }

    /// Non-fatal notes produced while training.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            TrainedModel::Svm(m) => m.warnings.clone(),
            TrainedModel::Adaboost(m) | TrainedModel::GradientBoosting(m) => m.warnings.clone(),
            _ => Vec::new(),
        }
    }
}

impl Classifier for TrainedModel {
    fn classes(&self) -> &[u32] {
        self.inner().classes()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.inner().predict_proba(x)
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        self.inner().predict(x)
    }
}

macro_rules! impl_classifier {
    ($($t:ty),*) => {$(
        impl Classifier for $t {
            fn classes(&self) -> &[u32] {
                &self.classes
            }

            fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
                <$t>::predict_proba(self, x)
            }
        }
    )*};
}

impl_classifier!(SoftmaxRegressionModel, GaussianNbModel, SvmModel, MlpModel, DecisionTreeModel, ForestModel, BoostedModel);

/// Train the family named by `spec`. `seed` drives every random choice.
pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u32], seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    check_training(x, y)?;
    Ok(match spec {
        ModelSpec::LogisticRegression(hyper) => TrainedModel::LogisticRegression(softmax::train_softmax(x, y, hyper)?),
        ModelSpec::GaussianNb(_) => TrainedModel::GaussianNb(naive_bayes::train_gnb(x, y)?),
        ModelSpec::Svm(hyper) => TrainedModel::Svm(svm::train_svm(x, y, hyper)?),
        ModelSpec::NeuralNetwork(hyper) => TrainedModel::NeuralNetwork(mlp::train_mlp(x, y, hyper, seed)?),
        ModelSpec::Knn(hyper) => TrainedModel::Knn(knn::train_knn(x, y, hyper)?),
        ModelSpec::DecisionTree(hyper) => TrainedModel::DecisionTree(cart::build_tree(x, y, hyper, seed)?),
        ModelSpec::RandomForest(hyper) => TrainedModel::RandomForest(forest::train_random_forest(x, y, hyper, seed)?),
        ModelSpec::ExtraTrees(hyper) => TrainedModel::ExtraTrees(forest::train_extra_trees(x, y, hyper, seed)?),
        ModelSpec::Adaboost(hyper) => TrainedModel::Adaboost(boosting::train_adaboost(x, y, hyper, seed)?),
        ModelSpec::GradientBoosting(hyper) => {
            TrainedModel::GradientBoosting(boosting::train_gradient_boosting(x, y, hyper, seed)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_round_trip() {
        let spec: ModelSpec = serde_json::from_str(r#"{"family":"random_forest","n_trees":7}"#).unwrap();
        match &spec {
            ModelSpec::RandomForest(hyper) => assert_eq!(hyper.n_trees, 7),
            other => panic!("{other:?}"),
        }
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let nb: ModelSpec = serde_json::from_str(r#"{"family":"gaussian_nb"}"#).unwrap();
        assert_eq!(nb, ModelSpec::GaussianNb(GnbHyper::default()));
    }

    #[test]
    fn unknown_family_and_keys_rejected() {
        let err = serde_json::from_str::<ModelSpec>(r#"{"family":"xgboost"}"#).unwrap_err();
        assert!(err.to_string().contains("xgboost"));
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"knn","k":3,"bogus":1}"#).is_err());
    }

    #[test]
    fn class_index_encodes() {
        let idx = ClassIndex::fit(&[3, 1, 3, 2]).unwrap();
        assert_eq!(idx.classes, [1, 2, 3]);
        assert_eq!(idx.encode(&[3, 1]).unwrap(), [2, 0]);
        assert!(matches!(idx.position(9), Err(Error::UnknownLabel(9))));
    }
}
