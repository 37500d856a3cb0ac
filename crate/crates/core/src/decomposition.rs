//! Principal component analysis via symmetric eigendecomposition of the
//! sample covariance, with explained-variance component selection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `m × m` matrix whose columns are principal directions, by descending variance.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    pub center: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub n_kept: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentPolicy {
    CumulativeThreshold(f64),
    FixedCount(usize),
}

impl Default for ComponentPolicy {
    fn default() -> Self {
        ComponentPolicy::CumulativeThreshold(0.95)
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and eigenvectors as matrix columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v[(i, i)] = 1.0;
    }
    let total: f64 = a.as_slice().iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Sample covariance (denominator `n − 1`) of the columns of `x`, and the column means.
pub fn covariance(x: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, m) = (x.rows(), x.cols());
    let mut mean = vec![0.0; m];
    for row in x.iter_rows() {
        for (mu, v) in mean.iter_mut().zip(row) {
            *mu += v;
        }
    }
    for mu in mean.iter_mut() {
        *mu /= n as f64;
    }
    let mut cov = Matrix::zeros(m, m);
    let mut centered = vec![0.0; m];
    for row in x.iter_rows() {
        for (c, (v, mu)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - mu;
        }
        for p in 0..m {
            let cp = centered[p];
            for q in p..m {
                cov[(p, q)] += cp * centered[q];
            }
        }
    }
    let denom = (n - 1) as f64;
    for p in 0..m {
        for q in p..m {
            let v = cov[(p, q)] / denom;
            cov[(p, q)] = v;
            cov[(q, p)] = v;
        }
    }
    (cov, mean)
}

pub fn fit_pca(x: &Matrix) -> Result<PcaModel> {
    if x.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    if x.cols() == 0 {
        return Err(Error::InsufficientData("PCA needs at least one column".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let m = x.cols();
    let (cov, center) = covariance(x);
    let (values, vectors) = symmetric_eigen(&cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let mut components = Matrix::zeros(m, m);
    for (c, &i) in order.iter().enumerate() {
        let first = (0..m)
            .map(|r| vectors[(r, i)])
            .find(|v| math::abs(*v) > 1e-12)
            .unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            components[(r, c)] = sign * vectors[(r, i)];
        }
    }
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratio = if total > 0.0 {
        eigenvalues.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    Ok(PcaModel {
        components,
        eigenvalues,
        center,
        explained_ratio,
        n_kept: m,
    })
}

pub fn select_components(p: &PcaModel, policy: ComponentPolicy) -> Result<PcaModel> {
    let m = p.eigenvalues.len();
    let n_kept = match policy {
        ComponentPolicy::CumulativeThreshold(t) => {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "cumulative threshold {t} is outside (0, 1]"
                )));
            }
            let mut cum = 0.0;
            let mut k = m;
            for (i, r) in p.explained_ratio.iter().enumerate() {
                cum += r;
                if cum >= t - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
        ComponentPolicy::FixedCount(k) => {
            if k < 1 || k > m {
                return Err(Error::InvalidParameter(format!(
                    "fixed component count {k} is outside 1..={m}"
                )));
            }
            k
        }
    };
    Ok(PcaModel {
        n_kept,
        ..p.clone()
    })
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.center.len()
    }

    /// `(x − center) · components[:, ..n_kept]`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        let m = self.input_dim();
        if x.cols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: x.cols(),
            });
        }
        let mut out = Matrix::zeros(x.rows(), self.n_kept);
        let mut centered = vec![0.0; m];
        for i in 0..x.rows() {
            for (c, (v, mu)) in centered.iter_mut().zip(x.row(i).iter().zip(&self.center)) {
                *c = v - mu;
            }
            let o = out.row_mut(i);
            for (r, &c) in centered.iter().enumerate() {
                let comp = self.components.row(r);
                for (k, ok) in o.iter_mut().enumerate() {
                    *ok += c * comp[k];
                }
            }
        }
        Ok(out)
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.n_kept {
            return Err(Error::DimensionMismatch {
                expected: self.n_kept,
                got: z.cols(),
            });
        }
        let m = self.input_dim();
        let mut out = Matrix::zeros(z.rows(), m);
        for i in 0..z.rows() {
            let zi = z.row(i);
            let o = out.row_mut(i);
            for (r, or) in o.iter_mut().enumerate() {
                let comp = self.components.row(r);
                *or = self.center[r] + (0..self.n_kept).map(|k| zi[k] * comp[k]).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// `(component index from 1, explained ratio, cumulative ratio)` rows for scree plots.
    pub fn scree(&self) -> Vec<(usize, f64, f64)> {
        let mut cum = 0.0;
        self.explained_ratio
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                cum += r;
                (i + 1, r, cum)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned_data() {
        let x = Matrix::from_rows(&[[-2.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        let p = fit_pca(&x).unwrap();
        assert!((p.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(p.components[(1, 0)].abs() < 1e-12);
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-12);
        assert!(p.explained_ratio[1].abs() < 1e-12);
    }

    #[test]
    fn isotropic_cloud_has_equal_eigenvalues() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let p = fit_pca(&x).unwrap();
        assert!((p.eigenvalues[0] - p.eigenvalues[1]).abs() < 1e-12);
    }

    #[test]
    fn diagonal_line_direction() {
        let x = Matrix::from_rows(&[[-3.0, -3.0], [-1.0, -1.0], [1.0, 1.0], [3.0, 3.0]]).unwrap();
        let p = fit_pca(&x).unwrap();
        // closed-form 2x2 oracle: covariance [[a, a], [a, a]] has eigenvector (1, 1)/sqrt(2)
        let (cov, _) = covariance(&x);
        let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
        let lambda = 0.5 * (a + c) + ((0.25 * (a - c) * (a - c)) + b * b).sqrt();
        let (vx, vy) = (b, lambda - a);
        let norm = (vx * vx + vy * vy).sqrt();
        assert!((p.components[(0, 0)] - vx / norm).abs() < 1e-12);
        assert!((p.components[(1, 0)] - vy / norm).abs() < 1e-12);
        assert!((p.components[(0, 0)] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((p.eigenvalues[0] - lambda).abs() < 1e-9);
    }

    #[test]
    fn cumulative_threshold_selection() {
        let p = PcaModel {
            components: Matrix::zeros(3, 3),
            eigenvalues: vec![6.0, 3.0, 1.0],
            center: vec![0.0; 3],
            explained_ratio: vec![0.6, 0.3, 0.1],
            n_kept: 3,
        };
        // cumulative-sum oracle: first k with running sum >= 0.9
        let cum: Vec<f64> = p.explained_ratio.iter().scan(0.0, |s, r| { *s += r; Some(*s) }).collect();
        let oracle = cum.iter().position(|&c| c >= 0.9 - 1e-12).unwrap() + 1;
        let s = select_components(&p, ComponentPolicy::CumulativeThreshold(0.9)).unwrap();
        assert_eq!(s.n_kept, oracle);
        assert_eq!(s.n_kept, 2);
        assert!(select_components(&p, ComponentPolicy::FixedCount(4)).is_err());
        assert!(select_components(&p, ComponentPolicy::CumulativeThreshold(0.0)).is_err());
    }

    fn wide_matrix(n: usize, m: usize, seed: u64) -> Matrix {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let mut x = Matrix::zeros(n, m);
        for i in 0..n {
            let shared: f64 = rng.random_range(-1.0..1.0);
            for j in 0..m {
                x[(i, j)] = rng.random_range(-1.0..1.0) + shared * (j % 3) as f64;
            }
        }
        x
    }

    #[test]
    fn fixed_counts_from_the_bank_pipelines() {
        let x = wide_matrix(120, 50, 1);
        let p = fit_pca(&x).unwrap();
        assert_eq!(select_components(&p, ComponentPolicy::FixedCount(43)).unwrap().n_kept, 43);
        assert_eq!(select_components(&p, ComponentPolicy::FixedCount(38)).unwrap().n_kept, 38);
    }

    #[test]
    fn center_projects_to_zero() {
        let x = wide_matrix(30, 4, 2);
        let p = fit_pca(&x).unwrap();
        let c = Matrix::new(1, 4, p.center.clone()).unwrap();
        assert!(p.project(&c).unwrap().as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(p.project(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn line_reconstruction_with_one_component() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 3.0], [2.0, 5.0], [3.0, 7.0]]).unwrap();
        let p = select_components(&fit_pca(&x).unwrap(), ComponentPolicy::FixedCount(1)).unwrap();
        let back = p.reconstruct(&p.project(&x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_pca(&Matrix::zeros(1, 3)).is_err());
        let mut x = Matrix::zeros(3, 2);
        x[(0, 0)] = f64::NAN;
        assert_eq!(fit_pca(&x).unwrap_err(), Error::NonFinite);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn pca_invariants(n in 3usize..40, m in 1usize..8, seed in any::<u64>()) {
            let x = wide_matrix(n, m, seed);
            let p = fit_pca(&x).unwrap();
            // orthonormal columns
            for a in 0..m {
                for b in 0..m {
                    let d: f64 = (0..m).map(|r| p.components[(r, a)] * p.components[(r, b)]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((d - want).abs() < 1e-8);
                }
            }
            // descending, non-negative, ratios sum to 1
            prop_assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(p.eigenvalues.iter().all(|&v| v >= 0.0));
            prop_assert!((p.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            // variance conservation
            let (cov, _) = covariance(&x);
            let trace: f64 = (0..m).map(|i| cov[(i, i)]).sum();
            prop_assert!((p.eigenvalues.iter().sum::<f64>() - trace).abs() <= 1e-8 * trace.max(1e-300));
            // decorrelated projection
            let z = p.project(&x).unwrap();
            let (zc, _) = covariance(&z);
            for a in 0..m {
                for b in 0..m {
                    if a != b {
                        prop_assert!(zc[(a, b)].abs() < 1e-6 * trace.max(1e-12));
                    }
                }
            }
            // sign convention
            for c in 0..m {
                let first = (0..m).map(|r| p.components[(r, c)]).find(|v| v.abs() > 1e-12);
                prop_assert!(first.map_or(true, |v| v > 0.0));
            }
            // full basis is an isometry
            let d0 = crate::math::squared_distance(x.row(0), x.row(1));
            let d1 = crate::math::squared_distance(z.row(0), z.row(1));
            prop_assert!((d0 - d1).abs() < 1e-8 * d0.max(1.0));
            // monotone reconstruction error
            let mut prev = f64::INFINITY;
            for k in 1..=m {
                let pk = select_components(&p, ComponentPolicy::FixedCount(k)).unwrap();
                let back = pk.reconstruct(&pk.project(&x).unwrap()).unwrap();
                let err = crate::math::squared_distance(back.as_slice(), x.as_slice()) / n as f64;
                prop_assert!(err <= prev + 1e-10);
                prev = err;
            }
        }
    }
}
