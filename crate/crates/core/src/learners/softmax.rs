//! Multinomial logistic regression trained by full-batch gradient descent on
//! L2-regularised cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, ClassIndex};
use crate::math;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftmaxHyper {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_l2")]
    pub l2: f64,
}

fn default_lr() -> f64 {
    0.5
}

fn default_epochs() -> usize {
    300
}

fn default_l2() -> f64 {
    1e-4
}

impl Default for SoftmaxHyper {
    fn default() -> Self {
        SoftmaxHyper {
            lr: default_lr(),
            epochs: default_epochs(),
            l2: default_l2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRegressionModel {
    /// `K × (m + 1)`; the last column is the bias.
    pub theta: Matrix,
    pub classes: Vec<u32>,
    /// Training loss at the start of every epoch, then the final loss.
    pub loss_trace: Vec<f64>,
}

fn logits(theta: &Matrix, x: &[f64], out: &mut [f64]) {
    let m = x.len();
    for (k, o) in out.iter_mut().enumerate() {
        let row = theta.row(k);
        *o = math::dot(&row[..m], x) + row[m];
    }
}

/// Mean cross-entropy plus `l2/2 · ‖θ‖²` (bias excluded), and its gradient.
pub fn loss_and_gradient(theta: &Matrix, x: &Matrix, y: &[usize], l2: f64) -> (f64, Matrix) {
    let (n, m, k) = (x.rows(), x.cols(), theta.rows());
    let mut grad = Matrix::zeros(k, m + 1);
    let mut z = vec![0.0; k];
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    for i in 0..n {
        let xi = x.row(i);
        logits(theta, xi, &mut z);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + math::ln(z.iter().map(|v| math::exp(v - max)).sum::<f64>());
        loss += lse - z[y[i]];
        math::softmax_into(&z, &mut p);
        p[y[i]] -= 1.0;
        for (c, &pc) in p.iter().enumerate() {
            let g = grad.row_mut(c);
            for (gj, &xj) in g[..m].iter_mut().zip(xi) {
                *gj += pc * xj;
            }
            g[m] += pc;
        }
    }
    let inv = 1.0 / n as f64;
    let mut reg = 0.0;
    for c in 0..k {
        let t = theta.row(c);
        let g = grad.row_mut(c);
        for j in 0..=m {
            g[j] *= inv;
            if j < m {
                g[j] += l2 * t[j];
                reg += t[j] * t[j];
            }
        }
    }
    (loss * inv + 0.5 * l2 * reg, grad)
}

pub fn train_softmax(x: &Matrix, y: &[u32], hyper: &SoftmaxHyper) -> Result<SoftmaxRegressionModel> {
    let index = ClassIndex::fit(y)?;
    let k = index.classes.len();
    if x.rows() < k {
        return Err(Error::InsufficientData("softmax regression needs n >= K".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let targets = index.encode(y)?;
    let mut theta = Matrix::zeros(k, x.cols() + 1);
    let mut trace = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..=hyper.epochs {
        let (loss, grad) = loss_and_gradient(&theta, x, &targets, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
        if epoch == hyper.epochs {
            break;
        }
        for (t, g) in (0..k).flat_map(|c| (0..=x.cols()).map(move |j| (c, j))).map(|(c, j)| ((c, j), grad[(c, j)])) {
            theta[t] -= hyper.lr * g;
        }
    }
    Ok(SoftmaxRegressionModel {
        theta,
        classes: index.classes,
        loss_trace: trace,
    })
}

impl SoftmaxRegressionModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.theta.cols() - 1, x)?;
        let k = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut z = vec![0.0; k];
        for i in 0..x.rows() {
            logits(&self.theta, x.row(i), &mut z);
            math::softmax_into(&z, out.row_mut(i));
        }
        Ok(out)
    }
}
