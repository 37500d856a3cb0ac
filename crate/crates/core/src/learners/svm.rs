//! Soft-margin kernel SVM. Each one-vs-rest dual is solved by SMO with
//! maximal-violating-pair working-set selection.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_dims, check_training, ClassIndex};
use crate::{math, Error, Matrix, Result};

const TAU: f64 = 1e-12;
/// Kernel rows kept in memory during training, in number of f64 entries.
const CACHE_ENTRIES: usize = 8 << 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Polynomial,
    #[default]
    Rbf,
    Sigmoid,
    Laplacian,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub kind: KernelKind,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "three")]
    pub degree: u32,
}

fn one() -> f64 {
    1.0
}

fn three() -> u32 {
    3
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { kind: KernelKind::Rbf, sigma: 1.0, c: 1.0, alpha: 1.0, degree: 3 }
    }
}

impl KernelSpec {
    pub fn of(kind: KernelKind) -> Self {
        KernelSpec { kind, ..KernelSpec::default() }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "poly",
            KernelKind::Rbf => "rbf",
            KernelKind::Sigmoid => "sigmoid",
            KernelKind::Laplacian => "laplacian",
            KernelKind::Exponential => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let uses_sigma = matches!(self.kind, KernelKind::Rbf | KernelKind::Laplacian | KernelKind::Exponential);
        if uses_sigma && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter("kernel sigma must be > 0".into()));
        }
        if self.kind == KernelKind::Polynomial && self.degree < 1 {
            return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => math::dot(a, b),
            KernelKind::Polynomial => math::powi(math::dot(a, b) + self.c, self.degree as i32),
            KernelKind::Rbf => math::exp(-math::squared_distance(a, b) / (2.0 * self.sigma * self.sigma)),
            KernelKind::Sigmoid => math::tanh(self.alpha * math::dot(a, b) + self.c),
            KernelKind::Laplacian => math::exp(-math::sqrt(math::squared_distance(a, b)) / self.sigma),
            KernelKind::Exponential => {
                math::exp(-math::sqrt(math::squared_distance(a, b)) / (2.0 * self.sigma * self.sigma))
            }
        }
    }
}

/// Evaluate a kernel on two points.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(spec.eval(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmHyper {
    #[serde(default)]
    pub kernel: KernelSpec,
    /// Penalty on slack.
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// SMO iteration cap per binary subproblem.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    200_000
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper { kernel: KernelSpec::default(), c: 1.0, tol: default_tol(), max_iter: default_max_iter() }
    }
}

impl SvmHyper {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("svm C must be > 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("svm tol must be > 0".into()));
        }
        Ok(())
    }
}

/// One binary subproblem: class `positive` against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: u32,
    /// Rows of `SvmModel::vectors` with `alpha > 1e-8`.
    pub support: Vec<usize>,
    pub alpha: Vec<f64>,
    /// `alpha_i · y_i`, aligned with `support`.
    pub coef: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinarySvm {
    fn score(&self, kx: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(&s, &c)| c * kx[s]).sum::<f64>() + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<u32>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
    /// Union of support vectors over all subproblems.
    pub vectors: Matrix,
    /// One subproblem per class, or a single one when there are two classes
    /// (the first class then scores the negation).
    pub machines: Vec<BinarySvm>,
    pub warnings: Vec<String>,
}

struct KernelCache<'a> {
    x: &'a Matrix,
    kernel: KernelSpec,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a Matrix, kernel: KernelSpec) -> Self {
        let n = x.rows();
        KernelCache {
            x,
            kernel,
            rows: vec![None; n],
            order: VecDeque::new(),
            capacity: (CACHE_ENTRIES / n.max(1)).max(2),
            diag: (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect(),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = self.x.row(i);
            let r = (0..self.x.rows()).map(|j| self.kernel.eval(xi, self.x.row(j))).collect();
            self.rows[i] = Some(r);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap_or(&[])
    }
}

struct Dual {
    alpha: Vec<f64>,
    b: f64,
    iterations: usize,
    converged: bool,
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y < 0.0 && a < c) || (y > 0.0 && a > 0.0)
}

fn solve_dual(cache: &mut KernelCache<'_>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Dual {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(y[t], alpha[t], c) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(y[t], alpha[t], c) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = cache.row(i)[j];
        let (kii, kjj) = (cache.diag[i], cache.diag[j]);
        let quad = if kii + kjj - 2.0 * kij > TAU { kii + kjj - 2.0 * kij } else { TAU };
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (yi, yj) = (y[i], y[j]);
        let ri = cache.row(i).to_vec();
        let rj = cache.row(j);
        for t in 0..n {
            grad[t] += y[t] * (yi * ri[t] * di + yj * rj[t] * dj);
        }
    }

    // rho from free vectors, else the midpoint of the feasible interval
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] > 0.0) || (alpha[t] <= 0.0 && y[t] < 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    Dual { alpha, b: -rho, iterations, converged }
}

pub fn train_svm(x: &Matrix, y: &[u32], hyper: &SvmHyper) -> Result<SvmModel> {
    check_training(x, y)?;
    hyper.validate()?;
    let index = ClassIndex::fit(y)?;
    if index.len() < 2 {
        return Err(Error::InsufficientData("svm needs at least two classes".into()));
    }
    let positives: Vec<u32> = if index.len() == 2 { vec![index.classes[1]] } else { index.classes.clone() };
    let mut cache = KernelCache::new(x, hyper.kernel);
    let mut duals = Vec::with_capacity(positives.len());
    let mut warnings = Vec::new();
    for &pos in &positives {
        let signs: Vec<f64> = y.iter().map(|&c| if c == pos { 1.0 } else { -1.0 }).collect();
        let dual = solve_dual(&mut cache, &signs, hyper.c, hyper.tol, hyper.max_iter);
        if !dual.converged {
            warnings.push(alloc::format!(
                "svm subproblem for class {pos} stopped after {} iterations without meeting tol",
                dual.iterations
            ));
        }
        duals.push((pos, signs, dual));
    }

    let mut used = vec![usize::MAX; x.rows()];
    let mut vectors = Matrix::with_cols(x.cols());
    let mut machines = Vec::with_capacity(duals.len());
    for (pos, signs, dual) in duals {
        let mut m = BinarySvm {
            positive: pos,
            support: Vec::new(),
            alpha: Vec::new(),
            coef: Vec::new(),
            b: dual.b,
            iterations: dual.iterations,
            converged: dual.converged,
        };
        for (t, &a) in dual.alpha.iter().enumerate() {
            if a > 1e-8 {
                if used[t] == usize::MAX {
                    used[t] = vectors.rows();
                    vectors.push_row(x.row(t))?;
                }
                m.support.push(used[t]);
                m.alpha.push(a);
                m.coef.push(a * signs[t]);
            }
        }
        machines.push(m);
    }
    Ok(SvmModel {
        classes: index.classes,
        kernel: hyper.kernel,
        c: hyper.c,
        tol: hyper.tol,
        vectors,
        machines,
        warnings,
    })
}

impl SvmModel {
    /// Per-class decision scores `Σ α_i y_i K(x, x_i) + b`.
    pub fn decision_function(&self, x: &Matrix) -> Result<Matrix> {
        check_dims(self.vectors.cols(), x)?;
        let k = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut kx = vec![0.0; self.vectors.rows()];
        for i in 0..x.rows() {
            let xi = x.row(i);
            for (s, v) in kx.iter_mut().enumerate() {
                *v = self.kernel.eval(xi, self.vectors.row(s));
            }
            if k == 2 {
                let f = self.machines[0].score(&kx);
                out[(i, 0)] = -f;
                out[(i, 1)] = f;
            } else {
                for (c, m) in self.machines.iter().enumerate() {
                    out[(i, c)] = m.score(&kx);
                }
            }
        }
        Ok(out)
    }

    /// Softmax over the decision scores. A ranking score, not a calibrated
    /// probability.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut scores = self.decision_function(x)?;
        let mut buf = vec![0.0; self.classes.len()];
        for i in 0..scores.rows() {
            buf.copy_from_slice(scores.row(i));
            math::softmax_into(&buf, scores.row_mut(i));
        }
        Ok(scores)
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

    fn separable() -> (Matrix, Vec<u32>) {
        let x = Matrix::from_rows(&[
            [0.0, 0.0],
            [1.0, 0.5],
            [0.5, 1.0],
            [-0.5, 0.2],
            [3.0, 3.0],
            [4.0, 3.5],
            [3.5, 4.5],
            [5.0, 4.0],
        ])
        .unwrap();
        (x, vec![1, 1, 1, 1, 2, 2, 2, 2])
    }

    #[test]
    fn kernel_values() {
        let a = [1.0, 2.0];
        let b = [1.0, 3.0];
        let rbf = KernelSpec::of(KernelKind::Rbf);
        assert_eq!(rbf.eval(&a, &a), 1.0);
        assert!((rbf.eval(&a, &b) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((rbf.eval(&a, &b) - 0.60653).abs() < 1e-5);
        assert_eq!(KernelSpec::of(KernelKind::Linear).eval(&a, &a), 5.0);
        let poly = KernelSpec { kind: KernelKind::Polynomial, c: 1.0, degree: 2, ..KernelSpec::default() };
        assert_eq!(poly.eval(&a, &b), 64.0);
        let lap = KernelSpec { kind: KernelKind::Laplacian, sigma: 2.0, ..KernelSpec::default() };
        assert!((lap.eval(&a, &b) - (-0.5f64).exp()).abs() < 1e-15);
        let ex = KernelSpec { kind: KernelKind::Exponential, sigma: 2.0, ..KernelSpec::default() };
        assert!((ex.eval(&a, &b) - (-1.0f64 / 8.0).exp()).abs() < 1e-15);
        let sig = KernelSpec { kind: KernelKind::Sigmoid, alpha: 0.5, c: -1.0, ..KernelSpec::default() };
        assert!((sig.eval(&a, &b) - (2.5f64).tanh()).abs() < 1e-15);
        assert!(kernel_eval(&rbf, &a, &[1.0]).is_err());
    }

    #[test]
    fn separable_margin_and_duals() {
        let (x, y) = separable();
        let hyper = SvmHyper { kernel: KernelSpec::of(KernelKind::Linear), c: 1e3, ..SvmHyper::default() };
        let model = train_svm(&x, &y, &hyper).unwrap();
        assert_eq!(model.predict(&x).unwrap(), y);
        let f = model.decision_function(&x).unwrap();
        for (i, &c) in y.iter().enumerate() {
            let yf = if c == 2 { f[(i, 1)] } else { -f[(i, 1)] };
            assert!(yf >= 1.0 - 1e-3, "row {i}: {yf}");
        }
        let m = &model.machines[0];
        assert!(m.alpha.iter().all(|&a| a >= 0.0 && a <= hyper.c));
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-6);
        // free support vectors sit on the margin
        for (&s, &a) in m.support.iter().zip(&m.alpha) {
            if a < hyper.c - 1e-8 {
                let kx: Vec<f64> = (0..model.vectors.rows())
                    .map(|t| model.kernel.eval(model.vectors.row(s), model.vectors.row(t)))
                    .collect();
                assert!((m.score(&kx).abs() - 1.0).abs() < 10.0 * hyper.tol);
            }
        }
        let far = model.decision_function(&Matrix::from_rows(&[[10.0, 10.0]]).unwrap()).unwrap();
        assert!(far[(0, 1)] > 1.0);
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let (x, y) = xor();
        let acc = |kind| {
            let hyper = SvmHyper { kernel: KernelSpec::of(kind), c: 100.0, ..SvmHyper::default() };
            let pred = train_svm(&x, &y, &hyper).unwrap().predict(&x).unwrap();
            pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / 4.0
        };
        assert!(acc(KernelKind::Linear) <= 0.75);
        assert_eq!(acc(KernelKind::Rbf), 1.0);
    }

    #[test]
    fn multiclass_duals_feasible() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.3, 0.1], [5.0, 0.0], [5.2, 0.4], [0.0, 5.0], [0.2, 5.3]]).unwrap();
        let y = [1, 1, 2, 2, 3, 3];
        let hyper = SvmHyper { c: 2.0, ..SvmHyper::default() };
        let model = train_svm(&x, &y, &hyper).unwrap();
        assert_eq!(model.machines.len(), 3);
        assert_eq!(model.predict(&x).unwrap(), y);
        for m in &model.machines {
            assert!(m.alpha.iter().all(|&a| a > 0.0 && a <= 2.0));
            assert!(m.coef.iter().sum::<f64>().abs() < 1e-6);
        }
        let p = model.predict_proba(&x).unwrap();
        for r in p.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
