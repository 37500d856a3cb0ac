//! k-nearest-neighbour majority vote.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, ClassIndex, Classifier};
use crate::neighbors::NeighborIndex;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnHyper {
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

impl Default for KnnHyper {
    fn default() -> Self {
        KnnHyper { k: default_k() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    /// Column position of each stored label in `classes`.
    pub y: Vec<usize>,
    pub classes: Vec<u32>,
    pub k: usize,
}

pub fn train_knn(x: &Matrix, y: &[u32], hyper: &KnnHyper) -> Result<KnnModel> {
    check_training(x, y)?;
    if hyper.k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if hyper.k > x.rows() {
        return Err(Error::InvalidParameter(alloc::format!("k = {} exceeds n = {}", hyper.k, x.rows())));
    }
    let index = ClassIndex::fit(y)?;
    Ok(KnnModel {
        x: x.clone(),
        y: index.encode(y)?,
        classes: index.classes,
        k: hyper.k,
    })
}

impl KnnModel {
    fn votes(&self, q: &[f64]) -> Vec<usize> {
        let index = NeighborIndex::new(&self.x);
        let mut votes = vec![0usize; self.classes.len()];
        for (i, _) in index.query(q, self.k, None) {
            votes[self.y[i]] += 1;
        }
        votes
    }

    /// Vote fractions over the `k` nearest stored points.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.x.cols(), x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        for i in 0..x.rows() {
            let votes = self.votes(x.row(i));
            for (o, v) in out.row_mut(i).iter_mut().zip(votes) {
                *o = v as f64 / self.k as f64;
            }
        }
        Ok(out)
    }
}

impl Classifier for KnnModel {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        KnnModel::predict_proba(self, x)
    }

    /// Most votes wins; ties go to the smallest class code.
    fn predict(&self, x: &Matrix) -> Result<Vec<u32>> {
        check_dims(self.x.cols(), x)?;
        Ok((0..x.rows())
            .map(|i| {
                let votes = self.votes(x.row(i));
                let mut best = 0;
                for (c, &v) in votes.iter().enumerate() {
                    if v > votes[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}
