//! Support vector machine trained by sequential minimal optimization.
//!
//! Binary machines follow Platt's SMO: the outer loop alternates full sweeps
//! with sweeps over non-bound multipliers, the second multiplier is chosen by
//! the maximal error difference with deterministic fallbacks, and training
//! stops when a full sweep finds no KKT violation beyond the tolerance.
//! Multiclass is one-vs-rest with argmax over decision values.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_predict_data, check_training_data};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32, coef0: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Poly {
                gamma,
                degree,
                coef0,
            } => (gamma * dot(a, b) + coef0).powi(*degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Soft-margin penalty.
    pub c: f64,
    pub kernel: Kernel,
    /// KKT tolerance.
    pub tol: f64,
    /// Cap on outer-loop sweeps.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

/// One trained binary machine: only support vectors are kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarySvm {
    /// alpha_i * y_i per support vector.
    coef: Vec<f64>,
    support: Matrix,
    bias: f64,
}

impl BinarySvm {
    pub fn decision(&self, kernel: &Kernel, row: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(self.support.rows_iter())
            .map(|(c, sv)| c * kernel.eval(sv, row))
            .sum::<f64>()
            + self.bias
    }

    /// Explicit weight vector, only meaningful for the linear kernel.
    pub fn linear_weights(&self) -> Vec<f64> {
        let f = self.support.n_cols();
        let mut w = alloc::vec![0.0f64; f];
        for (c, sv) in self.coef.iter().zip(self.support.rows_iter()) {
            for (wj, xj) in w.iter_mut().zip(sv) {
                *wj += c * xj;
            }
        }
        w
    }
}

/// One-vs-rest multiclass SVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    kernel: Kernel,
    machines: Vec<BinarySvm>,
    n_classes: usize,
    n_features: usize,
}

impl SvmParams {
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<SvmModel> {
        let n_classes = check_training_data(x, y)?;
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("penalty C must be positive"));
        }
        let gram = GramCache::new(x, self.kernel);
        let mut machines = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            let targets: Vec<f64> = y
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            machines.push(solve_binary(x, &targets, self, &gram));
        }
        Ok(SvmModel {
            kernel: self.kernel,
            machines,
            n_classes,
            n_features: x.n_cols(),
        })
    }
}

impl SvmModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn machine(&self, class: usize) -> &BinarySvm {
        &self.machines[class]
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Per-class decision values.
    pub fn decision_values(&self, row: &[f64]) -> Vec<f64> {
        self.machines
            .iter()
            .map(|m| m.decision(&self.kernel, row))
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_predict_data(x, self.n_features)?;
        let out = x
            .rows_iter()
            .map(|row| {
                let d = self.decision_values(row);
                let mut best = 0;
                for (c, &v) in d.iter().enumerate() {
                    if v > d[best] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        Ok(out)
    }
}

/// Precomputed Gram matrix up to a size cap, on-demand evaluation beyond it.
struct GramCache<'a> {
    x: &'a Matrix,
    kernel: Kernel,
    dense: Option<Vec<f64>>,
    n: usize,
}

const GRAM_CACHE_MAX_ROWS: usize = 3000;

impl<'a> GramCache<'a> {
    fn new(x: &'a Matrix, kernel: Kernel) -> Self {
        let n = x.n_rows();
        let dense = if n <= GRAM_CACHE_MAX_ROWS {
            let mut g = alloc::vec![0.0f64; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval(x.row(i), x.row(j));
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            Some(g)
        } else {
            None
        };
        Self { x, kernel, dense, n }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(g) => g[i * self.n + j],
            None => self.kernel.eval(self.x.row(i), self.x.row(j)),
        }
    }
}

/// Platt SMO for one binary problem; `y` entries are +1/-1.
fn solve_binary(x: &Matrix, y: &[f64], params: &SvmParams, gram: &GramCache) -> BinarySvm {
    let n = x.n_rows();
    let c = params.c;
    let tol = params.tol;
    let mut alpha = alloc::vec![0.0f64; n];
    let mut bias = 0.0f64;
    // errors[i] = f(x_i) - y_i; with all alphas zero, f = 0.
    let mut errors: Vec<f64> = y.iter().map(|&t| -t).collect();

    let take_step = |i1: usize,
                     i2: usize,
                     alpha: &mut Vec<f64>,
                     bias: &mut f64,
                     errors: &mut Vec<f64>|
     -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (alpha[i1], alpha[i2]);
        let (y1, y2) = (y[i1], y[i2]);
        let (e1, e2) = (errors[i1], errors[i2]);
        let s = y1 * y2;
        let (low, high) = if s < 0.0 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if low >= high {
            return false;
        }
        let k11 = gram.get(i1, i1);
        let k12 = gram.get(i1, i2);
        let k22 = gram.get(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= 0.0 {
            // Degenerate curvature (duplicate points); skip the pair.
            return false;
        }
        let mut a2_new = a2 + y2 * (e1 - e2) / eta;
        a2_new = a2_new.clamp(low, high);
        if (a2_new - a2).abs() < 1e-12 * (a2_new + a2 + 1e-12) {
            return false;
        }
        let a1_new = a1 + s * (a2 - a2_new);
        let b1 = *bias - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        let b2 = *bias - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        let b_new = if a1_new > 0.0 && a1_new < c {
            b1
        } else if a2_new > 0.0 && a2_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - *bias;
        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        for k in 0..n {
            errors[k] += d1 * gram.get(i1, k) + d2 * gram.get(i2, k) + db;
        }
        alpha[i1] = a1_new;
        alpha[i2] = a2_new;
        *bias = b_new;
        true
    };

    let examine = |i2: usize,
                   alpha: &mut Vec<f64>,
                   bias: &mut f64,
                   errors: &mut Vec<f64>|
     -> bool {
        let y2 = y[i2];
        let a2 = alpha[i2];
        let r2 = errors[i2] * y2;
        let violated = (r2 < -tol && a2 < c) || (r2 > tol && a2 > 0.0);
        if !violated {
            return false;
        }
        // Heuristic 1: maximal |E2 - E1| over non-bound multipliers.
        let mut best: Option<(f64, usize)> = None;
        for i1 in 0..n {
            if i1 != i2 && alpha[i1] > 0.0 && alpha[i1] < c {
                let gap = (errors[i2] - errors[i1]).abs();
                if best.map_or(true, |(g, _)| gap > g) {
                    best = Some((gap, i1));
                }
            }
        }
        if let Some((_, i1)) = best {
            if take_step(i1, i2, alpha, bias, errors) {
                return true;
            }
        }
        // Fallbacks: non-bound then all, deterministic start at i2 + 1.
        for offset in 1..n {
            let i1 = (i2 + offset) % n;
            if alpha[i1] > 0.0 && alpha[i1] < c && take_step(i1, i2, alpha, bias, errors) {
                return true;
            }
        }
        for offset in 1..n {
            let i1 = (i2 + offset) % n;
            if take_step(i1, i2, alpha, bias, errors) {
                return true;
            }
        }
        false
    };

    let mut examine_all = true;
    for _pass in 0..params.max_passes {
        let mut num_changed = 0usize;
        for i in 0..n {
            if examine_all || (alpha[i] > 0.0 && alpha[i] < c) {
                if examine(i, &mut alpha, &mut bias, &mut errors) {
                    num_changed += 1;
                }
            }
        }
        if examine_all {
            if num_changed == 0 {
                break; // no KKT violation above tol anywhere
            }
            examine_all = false;
        } else if num_changed == 0 {
            examine_all = true;
        }
    }

    let mut coef = Vec::new();
    let mut kept = Vec::new();
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            coef.push(a * y[i]);
            kept.push(i);
        }
    }
    BinarySvm {
        coef,
        support: x.select_rows(&kept),
        bias,
    }
}
