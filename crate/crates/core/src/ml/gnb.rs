//! Gaussian naive Bayes.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_predict_data, check_training_data};
use crate::error::Result;
use crate::matrix::Matrix;

/// Variance smoothing: every per-class variance gets
/// `var_smoothing * max_feature_variance` added for numerical stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnbParams {
    pub var_smoothing: f64,
}

impl Default for GnbParams {
    fn default() -> Self {
        Self { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GnbModel {
    log_prior: Vec<f64>,
    /// Per-class feature means, one row per class.
    means: Matrix,
    /// Per-class smoothed feature variances, one row per class.
    vars: Matrix,
}

impl GnbParams {
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<GnbModel> {
        let k = check_training_data(x, y)?;
        let f = x.n_cols();
        let n = x.n_rows() as f64;

        // Smoothing scale: the largest feature variance over the whole set.
        let mut global_mean = alloc::vec![0.0f64; f];
        for row in x.rows_iter() {
            for (m, v) in global_mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut max_var = 0.0f64;
        for j in 0..f {
            let var = x
                .rows_iter()
                .map(|row| (row[j] - global_mean[j]) * (row[j] - global_mean[j]))
                .sum::<f64>()
                / n;
            max_var = max_var.max(var);
        }
        let epsilon = self.var_smoothing * max_var.max(1e-300);

        let mut counts = alloc::vec![0usize; k];
        let mut means = Matrix::zeros(k, f);
        for (row, &c) in x.rows_iter().zip(y) {
            counts[c] += 1;
            for (j, &v) in row.iter().enumerate() {
                means.set(c, j, means.get(c, j) + v);
            }
        }
        for c in 0..k {
            let nc = counts[c] as f64;
            for j in 0..f {
                means.set(c, j, means.get(c, j) / nc);
            }
        }
        let mut vars = Matrix::zeros(k, f);
        for (row, &c) in x.rows_iter().zip(y) {
            for (j, &v) in row.iter().enumerate() {
                let d = v - means.get(c, j);
                vars.set(c, j, vars.get(c, j) + d * d);
            }
        }
        for c in 0..k {
            let nc = counts[c] as f64;
            for j in 0..f {
                vars.set(c, j, vars.get(c, j) / nc + epsilon);
            }
        }
        let log_prior = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
        Ok(GnbModel {
            log_prior,
            means,
            vars,
        })
    }
}

impl GnbModel {
    pub fn n_classes(&self) -> usize {
        self.log_prior.len()
    }

    /// Per-class joint log likelihood (up to the shared evidence term).
    pub fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_classes();
        let mut out = Vec::with_capacity(k);
        for c in 0..k {
            let mut ll = self.log_prior[c];
            let means = self.means.row(c);
            let vars = self.vars.row(c);
            for ((&v, &m), &var) in row.iter().zip(means).zip(vars) {
                let d = v - m;
                ll += -0.5 * (2.0 * core::f64::consts::PI * var).ln() - d * d / (2.0 * var);
            }
            out.push(ll);
        }
        out
    }

    /// Normalized posteriors via log-sum-exp.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_predict_data(x, self.means.n_cols())?;
        let k = self.n_classes();
        let mut out = Matrix::zeros(x.n_rows(), k);
        for (i, row) in x.rows_iter().enumerate() {
            let joint = self.log_joint(row);
            let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (c, &ll) in joint.iter().enumerate() {
                let e = (ll - max).exp();
                out.set(i, c, e);
                total += e;
            }
            for c in 0..k {
                out.set(i, c, out.get(i, c) / total);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_predict_data(x, self.means.n_cols())?;
        let out = x
            .rows_iter()
            .map(|row| {
                let joint = self.log_joint(row);
                let mut best = 0;
                for (c, &ll) in joint.iter().enumerate() {
                    if ll > joint[best] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Closed-form oracle: equal-prior N(0,1) vs N(4,1) has its decision
    /// boundary at x = 2; the fitted boundary lands within 0.05.
    #[test]
    fn two_gaussians_boundary_is_at_two() {
        let mut rng = crate::seed::stream_rng(2024, &[]);
        let n0 = Normal::new(0.0, 1.0).unwrap();
        let n1 = Normal::new(4.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..10_000 {
            rows.push(vec![n0.sample(&mut rng)]);
            labels.push(0);
            rows.push(vec![n1.sample(&mut rng)]);
            labels.push(1);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let model = GnbParams::default().fit(&x, &labels).unwrap();

        // Bisection on the log-joint difference.
        let diff = |v: f64| {
            let j = model.log_joint(&[v]);
            j[0] - j[1]
        };
        let (mut lo, mut hi) = (0.0, 4.0);
        assert!(diff(lo) > 0.0 && diff(hi) < 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = 0.5 * (lo + hi);
        assert!(
            (boundary - 2.0).abs() < 0.05,
            "boundary {boundary} not within 2 +/- 0.05"
        );
    }

    /// Posteriors sum to one per sample.
    #[test]
    fn posteriors_sum_to_one() {
        let mut rng = crate::seed::stream_rng(55, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3usize {
            for _ in 0..30 {
                rows.push(vec![
                    c as f64 + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                labels.push(c);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let model = GnbParams::default().fit(&x, &labels).unwrap();
        let proba = model.predict_proba(&x).unwrap();
        for i in 0..proba.n_rows() {
            let total: f64 = proba.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "row {i} sums to {total}");
        }
    }

    /// Permuting training rows leaves the fitted model unchanged.
    #[test]
    fn training_order_does_not_matter() {
        let x = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.5, 0.5],
            vec![4.0, 4.5],
            vec![4.2, 3.9],
        ])
        .unwrap();
        let y = vec![0, 0, 1, 1];
        let base = GnbParams::default().fit(&x, &y).unwrap();

        let perm = [3usize, 1, 0, 2];
        let xp = x.select_rows(&perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let permuted = GnbParams::default().fit(&xp, &yp).unwrap();

        let queries = Matrix::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        assert_eq!(
            base.predict(&queries).unwrap(),
            permuted.predict(&queries).unwrap()
        );
        for (a, b) in base
            .predict_proba(&queries)
            .unwrap()
            .data()
            .iter()
            .zip(permuted.predict_proba(&queries).unwrap().data())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Larger smoothing flattens the likelihood but keeps separable classes
    /// separable.
    #[test]
    fn smoothing_parameter_is_respected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![0.1], vec![5.0], vec![5.1]]).unwrap();
        let y = vec![0, 0, 1, 1];
        for smoothing in [1e-9, 1e-3, 1.0] {
            let model = GnbParams {
                var_smoothing: smoothing,
            }
            .fit(&x, &y)
            .unwrap();
            let q = Matrix::from_rows(&[vec![0.05], vec![5.05]]).unwrap();
            assert_eq!(model.predict(&q).unwrap(), vec![0, 1]);
        }
    }
}
