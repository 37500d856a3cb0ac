//! One-hidden-layer feed-forward network with softmax outputs, trained by
//! full-batch backpropagation on cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, ClassIndex};
use crate::{math, rng, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Logistic => math::sigmoid(z),
        }
    }

    /// Derivative expressed through the activation value `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpHyper {
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub l2: f64,
    #[serde(default)]
    pub activation: Activation,
}

fn default_hidden() -> usize {
    16
}

fn default_lr() -> f64 {
    0.5
}

fn default_epochs() -> usize {
    500
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden_units: default_hidden(),
            lr: default_lr(),
            epochs: default_epochs(),
            l2: 0.0,
            activation: Activation::Tanh,
        }
    }
}

/// Network parameters. Shapes: `w_hidden` m×H, `b_hidden` H, `w_out` H×K,
/// `b_out` K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(m: usize, h: usize, k: usize) -> Self {
        MlpParams {
            w_hidden: Matrix::zeros(m, h),
            b_hidden: vec![0.0; h],
            w_out: Matrix::zeros(h, k),
            b_out: vec![0.0; k],
        }
    }

    fn random(m: usize, h: usize, k: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut p = MlpParams::zeros(m, h, k);
        for v in p.flat_mut() {
            *v = r.random_range(-0.5..0.5);
        }
        p
    }

    /// All parameters in a fixed order, for updates and gradient checks.
    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_hidden
            .as_mut_slice()
            .iter_mut()
            .chain(self.b_hidden.iter_mut())
            .chain(self.w_out.as_mut_slice().iter_mut())
            .chain(self.b_out.iter_mut())
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend_from_slice(self.w_hidden.as_slice());
        out.extend_from_slice(&self.b_hidden);
        out.extend_from_slice(self.w_out.as_slice());
        out.extend_from_slice(&self.b_out);
        out
    }

    fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub params: MlpParams,
    pub activation: Activation,
    pub classes: Vec<u32>,
    pub loss_trace: Vec<f64>,
}

struct Forward {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

fn forward(p: &MlpParams, act: Activation, x: &[f64], fw: &mut Forward) {
    let h = p.b_hidden.len();
    for j in 0..h {
        let mut z = p.b_hidden[j];
        for (i, &xi) in x.iter().enumerate() {
            z += xi * p.w_hidden[(i, j)];
        }
        fw.hidden[j] = act.apply(z);
    }
    let k = p.b_out.len();
    let mut logits = vec![0.0; k];
    for (c, l) in logits.iter_mut().enumerate() {
        *l = p.b_out[c];
        for j in 0..h {
            *l += fw.hidden[j] * p.w_out[(j, c)];
        }
    }
    math::softmax_into(&logits, &mut fw.probs);
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` over both weight matrices, and the
/// gradient with the same shapes as `p`.
pub fn loss_and_gradient(p: &MlpParams, act: Activation, x: &Matrix, y: &[usize], l2: f64) -> (f64, MlpParams) {
    let (n, m) = (x.rows(), x.cols());
    let (h, k) = (p.b_hidden.len(), p.b_out.len());
    let mut g = MlpParams::zeros(m, h, k);
    let mut fw = Forward { hidden: vec![0.0; h], probs: vec![0.0; k] };
    let mut delta_h = vec![0.0; h];
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate().take(n) {
        let xi = x.row(i);
        forward(p, act, xi, &mut fw);
        loss -= math::ln(fw.probs[yi].max(f64::MIN_POSITIVE));
        let mut delta_o = fw.probs.clone();
        delta_o[yi] -= 1.0;
        for j in 0..h {
            let mut back = 0.0;
            for c in 0..k {
                g.w_out[(j, c)] += fw.hidden[j] * delta_o[c];
                back += p.w_out[(j, c)] * delta_o[c];
            }
            delta_h[j] = back * act.derivative(fw.hidden[j]);
        }
        for c in 0..k {
            g.b_out[c] += delta_o[c];
        }
        for j in 0..h {
            g.b_hidden[j] += delta_h[j];
            for (a, &xa) in xi.iter().enumerate() {
                g.w_hidden[(a, j)] += xa * delta_h[j];
            }
        }
    }
    let inv = 1.0 / n as f64;
    for v in g.flat_mut() {
        *v *= inv;
    }
    let mut reg = 0.0;
    for (gv, &pv) in g.w_hidden.as_mut_slice().iter_mut().zip(p.w_hidden.as_slice()) {
        *gv += l2 * pv;
        reg += pv * pv;
    }
    for (gv, &pv) in g.w_out.as_mut_slice().iter_mut().zip(p.w_out.as_slice()) {
        *gv += l2 * pv;
        reg += pv * pv;
    }
    (loss * inv + 0.5 * l2 * reg, g)
}

pub fn train_mlp(x: &Matrix, y: &[u32], hyper: &MlpHyper, seed: u64) -> Result<MlpModel> {
    check_training(x, y)?;
    if hyper.hidden_units == 0 {
        return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
    }
    let index = ClassIndex::fit(y)?;
    let targets = index.encode(y)?;
    let mut params = MlpParams::random(x.cols(), hyper.hidden_units, index.len(), seed);
    let mut trace = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..=hyper.epochs {
        let (loss, grad) = loss_and_gradient(&params, hyper.activation, x, &targets, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(loss);
        if epoch == hyper.epochs {
            break;
        }
        for (pv, gv) in params.flat_mut().zip(grad.flat()) {
            *pv -= hyper.lr * gv;
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    Ok(MlpModel {
        params,
        activation: hyper.activation,
        classes: index.classes,
        loss_trace: trace,
    })
}

impl MlpModel {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.params.w_hidden.rows(), x)?;
        let k = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut fw = Forward { hidden: vec![0.0; self.params.b_hidden.len()], probs: vec![0.0; k] };
        for i in 0..x.rows() {
            forward(&self.params, self.activation, x.row(i), &mut fw);
            out.row_mut(i).copy_from_slice(&fw.probs);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Classifier;

    fn xor() -> (Matrix, Vec<u32>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        (x, vec![1, 2, 2, 1])
    }

    #[test]
    fn zero_network_is_uniform() {
        let model = MlpModel {
            params: MlpParams::zeros(3, 2, 4),
            activation: Activation::Tanh,
            classes: vec![1, 2, 3, 4],
            loss_trace: vec![],
        };
        let p = model.predict_proba(&Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert!(p.row(0).iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = rng::seeded(5);
        let mut x = Matrix::zeros(6, 3);
        for v in 0..18 {
            x[(v / 3, v % 3)] = r.random_range(-1.0..1.0);
        }
        let y = [0, 1, 2, 0, 1, 2];
        for act in [Activation::Tanh, Activation::Logistic] {
            let p = MlpParams::random(3, 4, 3, 11);
            let (_, g) = loss_and_gradient(&p, act, &x, &y, 1e-3);
            let analytic = g.flat();
            let base = p.flat();
            let h = 1e-5;
            for (idx, &a) in analytic.iter().enumerate() {
                let mut plus = p.clone();
                let mut minus = p.clone();
                *plus.flat_mut().nth(idx).unwrap() = base[idx] + h;
                *minus.flat_mut().nth(idx).unwrap() = base[idx] - h;
                let fd = (loss_and_gradient(&plus, act, &x, &y, 1e-3).0 - loss_and_gradient(&minus, act, &x, &y, 1e-3).0)
                    / (2.0 * h);
                let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-8);
                assert!(rel < 1e-4, "{act:?} param {idx}: {fd} vs {a}");
            }
        }
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor();
        let hyper = MlpHyper { hidden_units: 4, lr: 1.0, epochs: 3000, l2: 0.0, activation: Activation::Tanh };
        let solved = (0..5).any(|seed| {
            let model = train_mlp(&x, &y, &hyper, seed).unwrap();
            model.predict(&x).unwrap() == y
        });
        assert!(solved);
    }

    #[test]
    fn training_is_reproducible() {
        let (x, y) = xor();
        let hyper = MlpHyper { epochs: 50, ..MlpHyper::default() };
        assert_eq!(train_mlp(&x, &y, &hyper, 3).unwrap(), train_mlp(&x, &y, &hyper, 3).unwrap());
    }
}
