//! Gaussian naive Bayes with a relative variance floor.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, ClassIndex};
use crate::math;
use crate::{Matrix, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian naive Bayes has no tunable knobs; the struct exists so configs
/// can reject stray keys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnbHyper {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub classes: Vec<u32>,
    pub priors: Vec<f64>,
    /// `K × m`
    pub means: Matrix,
    /// `K × m`, every entry at least `epsilon`
    pub variances: Matrix,
    pub epsilon: f64,
}

pub fn train_gnb(x: &Matrix, y: &[u32]) -> Result<GaussianNbModel> {
    check_training(x, y)?;
    let index = ClassIndex::fit(y)?;
    let targets = index.encode(y)?;
    let (n, m, k) = (x.rows(), x.cols(), index.len());

    let mut counts = vec![0usize; k];
    let mut means = Matrix::zeros(k, m);
    for (i, &c) in targets.iter().enumerate() {
        counts[c] += 1;
        for (mu, &v) in means.row_mut(c).iter_mut().zip(x.row(i)) {
            *mu += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        for mu in means.row_mut(c) {
            *mu /= cnt as f64;
        }
    }
    let mut variances = Matrix::zeros(k, m);
    for (i, &c) in targets.iter().enumerate() {
        let mu = means.row(c).to_vec();
        for ((s, &v), mu) in variances.row_mut(c).iter_mut().zip(x.row(i)).zip(mu) {
            *s += (v - mu) * (v - mu);
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        for s in variances.row_mut(c) {
            *s /= cnt as f64;
        }
    }

    let mut max_var: f64 = 0.0;
    for j in 0..m {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        max_var = max_var.max(var);
    }
    let epsilon = if max_var > 0.0 { 1e-9 * max_var } else { 1e-9 };
    for c in 0..k {
        for s in variances.row_mut(c) {
            *s = s.max(epsilon);
        }
    }

    Ok(GaussianNbModel {
        classes: index.classes,
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        means,
        variances,
        epsilon,
    })
}

impl GaussianNbModel {
    /// `log P(C_k) + Σ_j log N(x_j; μ_kj, σ²_kj)` for every class.
    pub fn log_posteriors(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let mu = self.means.row(c);
                let var = self.variances.row(c);
                let ll: f64 = x
                    .iter()
                    .zip(mu)
                    .zip(var)
                    .map(|((&v, &m), &s)| -0.5 * (LN_2PI + math::ln(s) + (v - m) * (v - m) / s))
                    .sum();
                math::ln(self.priors[c]) + ll
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.means.cols(), x)?;
        let mut out = Matrix::zeros(x.rows(), self.classes.len());
        for i in 0..x.rows() {
            let lp = self.log_posteriors(x.row(i));
            math::softmax_into(&lp, out.row_mut(i));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Classifier;

    #[test]
    fn symmetric_midpoint_is_even() {
        let x = Matrix::from_rows(&[[-2.0], [-1.0], [-3.0], [2.0], [1.0], [3.0]]).unwrap();
        let model = train_gnb(&x, &[1, 1, 1, 2, 2, 2]).unwrap();
        let p = model.predict_proba(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-9);
        assert!((p[(0, 1)] - 0.5).abs() < 1e-9);
        // nearer mean wins
        assert_eq!(model.predict(&Matrix::from_rows(&[[-0.1], [0.4]]).unwrap()).unwrap(), [1, 2]);
    }

    #[test]
    fn query_at_class_mean_far_apart() {
        // std 1, means 3 apart
        let x = Matrix::from_rows(&[[-1.0], [1.0], [2.0], [4.0]]).unwrap();
        let model = train_gnb(&x, &[1, 1, 2, 2]).unwrap();
        assert_eq!(model.predict(&Matrix::from_rows(&[[0.0]]).unwrap()).unwrap(), [1]);
    }

    #[test]
    fn log_posterior_matches_hand_density() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 0.0], [6.0, 2.0], [8.0, 1.0]]).unwrap();
        let y = [1, 1, 2, 2, 2];
        let model = train_gnb(&x, &y).unwrap();
        // class 1: means (1, 2), variances (1, 1); class 2: means (6, 1), variances (8/3, 2/3)
        let q = [3.0, 2.0];
        let dens = |v: f64, mu: f64, s: f64| {
            (1.0 / (2.0 * core::f64::consts::PI * s).sqrt() * (-(v - mu) * (v - mu) / (2.0 * s)).exp()).ln()
        };
        let want1 = (0.4f64).ln() + dens(3.0, 1.0, 1.0) + dens(2.0, 2.0, 1.0);
        let want2 = (0.6f64).ln() + dens(3.0, 6.0, 8.0 / 3.0) + dens(2.0, 1.0, 2.0 / 3.0);
        let got = model.log_posteriors(&q);
        assert!((got[0] - want1).abs() < 1e-9);
        assert!((got[1] - want2).abs() < 1e-9);
        assert!((model.priors.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_cells_are_floored() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 5.0], [0.0, 2.0], [0.0, 7.0]]).unwrap();
        let model = train_gnb(&x, &[1, 1, 2, 2]).unwrap();
        assert!(model.variances.as_slice().iter().all(|&v| v >= model.epsilon && v > 0.0));
        let p = model.predict_proba(&Matrix::from_rows(&[[0.5, 3.0]]).unwrap()).unwrap();
        assert!(p.is_finite());
    }
}
