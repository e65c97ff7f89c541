//! Principal component analysis.
//!
//! Components are the top right-singular vectors of the centered data
//! matrix, computed by block subspace iteration with a final Rayleigh-Ritz
//! rotation. The covariance matrix is never formed, so conditioning follows
//! the data matrix itself; iteration starts from a fixed seeded basis and is
//! fully deterministic.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::stream_rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal components, one per row (n_components x n_features).
    pub components: Matrix,
    /// Fraction of total variance captured per component, non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    pub singular_values: Vec<f64>,
}

const MAX_ITERATIONS: usize = 500;
const EIGEN_REL_TOL: f64 = 1e-11;

/// Fits the top `n_components` principal components of `x`.
pub fn pca_fit(x: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (n, f) = (x.n_rows(), x.n_cols());
    if n_components == 0 || n_components > n.min(f) {
        return Err(Error::InvalidArgument(
            "n_components must be in 1..=min(n_rows, n_features)",
        ));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("pca input"));
    }

    let mut mean = alloc::vec![0.0f64; f];
    for row in x.rows_iter() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let total: f64 = centered.data().iter().map(|v| v * v).sum();

    // Deterministic random start, orthonormalized.
    let k = n_components;
    let mut rng = stream_rng(0x9ca0_57ab, &[]);
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut basis);

    // V <- orth(X^T (X V)) until the lambda estimates settle.
    let mut prev_lambda = alloc::vec![0.0f64; k];
    for _ in 0..MAX_ITERATIONS {
        let projected = times_basis(&centered, &basis); // n x k
        let mut next: Vec<Vec<f64>> = alloc::vec![alloc::vec![0.0f64; f]; k];
        for (i, row) in centered.rows_iter().enumerate() {
            for (j, col) in next.iter_mut().enumerate() {
                let u = projected[i * k + j];
                if u != 0.0 {
                    for (w, &v) in col.iter_mut().zip(row) {
                        *w += u * v;
                    }
                }
            }
        }
        let mut lambda: Vec<f64> = next
            .iter()
            .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        lambda.sort_by(|a, b| b.partial_cmp(a).unwrap());
        basis = next;
        orthonormalize(&mut basis);
        let settled = lambda.iter().zip(&prev_lambda).all(|(cur, prev)| {
            (cur - prev).abs() <= EIGEN_REL_TOL * cur.abs().max(1e-300)
        });
        prev_lambda = lambda;
        if settled {
            break;
        }
    }

    // Rayleigh-Ritz on the converged subspace: T = (X V)^T (X V).
    let projected = times_basis(&centered, &basis);
    let mut t = alloc::vec![alloc::vec![0.0f64; k]; k];
    for i in 0..n {
        for a in 0..k {
            for b in a..k {
                t[a][b] += projected[i * k + a] * projected[i * k + b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            t[a][b] = t[b][a];
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen(&t);

    // Rotate the basis into individual components, sorted by eigenvalue.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());
    let mut components = Matrix::zeros(k, f);
    let mut singular_values = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for (slot, &src) in order.iter().enumerate() {
        let row = components.row_mut(slot);
        for (j, col) in basis.iter().enumerate() {
            let w = eigvecs[j][src];
            if w != 0.0 {
                for (r, &v) in row.iter_mut().zip(col) {
                    *r += w * v;
                }
            }
        }
        // Sign convention: the entry with the largest magnitude is positive.
        let mut max_idx = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[max_idx].abs() {
                max_idx = j;
            }
        }
        if row[max_idx] < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        let ev = eigvals[src].max(0.0);
        singular_values.push(ev.sqrt());
        ratios.push(if total > 0.0 { ev / total } else { 0.0 });
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance_ratio: ratios,
        singular_values,
    })
}

/// Projects rows of `x` onto the fitted components.
pub fn pca_transform(m: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.n_cols() != m.mean.len() {
        return Err(Error::LengthMismatch {
            left: x.n_cols(),
            right: m.mean.len(),
        });
    }
    let k = m.components.n_rows();
    let mut out = Matrix::zeros(x.n_rows(), k);
    for (i, row) in x.rows_iter().enumerate() {
        for j in 0..k {
            let score = row
                .iter()
                .zip(&m.mean)
                .zip(m.components.row(j))
                .map(|((&v, &mu), &c)| (v - mu) * c)
                .sum();
            out.set(i, j, score);
        }
    }
    Ok(out)
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.n_rows()
    }

    /// Inverse transform: mean + scores * components.
    pub fn reconstruct(&self, scores: &Matrix) -> Matrix {
        let f = self.mean.len();
        let mut out = Matrix::zeros(scores.n_rows(), f);
        for i in 0..scores.n_rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for j in 0..self.n_components() {
                let s = scores.get(i, j);
                for (r, &c) in row.iter_mut().zip(self.components.row(j)) {
                    *r += s * c;
                }
            }
        }
        out
    }
}

/// x (n x f) times the k basis columns; returns n x k row-major.
fn times_basis(x: &Matrix, basis: &[Vec<f64>]) -> Vec<f64> {
    let k = basis.len();
    let mut out = alloc::vec![0.0f64; x.n_rows() * k];
    for (i, row) in x.rows_iter().enumerate() {
        for (j, col) in basis.iter().enumerate() {
            out[i * k + j] = row.iter().zip(col).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vanishing
/// columns are replaced by seeded random directions so the basis always has
/// full rank.
fn orthonormalize(basis: &mut [Vec<f64>]) {
    let f = basis[0].len();
    let mut rescue = stream_rng(0x0261_0be5, &[]);
    for j in 0..basis.len() {
        let mut attempts = 0;
        loop {
            for _pass in 0..2 {
                for prev in 0..j {
                    let proj: f64 = basis[j].iter().zip(&basis[prev]).map(|(a, b)| a * b).sum();
                    let (left, right) = basis.split_at_mut(j);
                    for (v, &p) in right[0].iter_mut().zip(&left[prev]) {
                        *v -= proj * p;
                    }
                }
            }
            let norm: f64 = basis[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in basis[j].iter_mut() {
                    *v /= norm;
                }
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "could not build an orthonormal basis");
            for v in basis[j].iter_mut() {
                *v = rescue.random_range(-1.0..1.0);
            }
            let _ = f;
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// eigenvalues and the rotation matrix whose columns are eigenvectors.
fn jacobi_eigen(t: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = t.len();
    let mut a: Vec<Vec<f64>> = t.to_vec();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..k {
            for q in p + 1..k {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let tan = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (tan * tan + 1.0).sqrt();
                let sin = tan * cos;
                for i in 0..k {
                    let (aip, aiq) = (a[i][p], a[i][q]);
                    a[i][p] = cos * aip - sin * aiq;
                    a[i][q] = sin * aip + cos * aiq;
                }
                for j in 0..k {
                    let (apj, aqj) = (a[p][j], a[q][j]);
                    a[p][j] = cos * apj - sin * aqj;
                    a[q][j] = sin * apj + cos * aqj;
                }
                for i in 0..k {
                    let (vip, viq) = (v[i][p], v[i][q]);
                    v[i][p] = cos * vip - sin * viq;
                    v[i][q] = sin * vip + cos * viq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..k).map(|i| a[i][i]).collect();
    (eigvals, v)
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
