//! Layer implementations with exact analytic gradients.
//!
//! Each layer caches what its backward pass needs during `forward_train`;
//! `forward_eval` is pure and never touches the caches, so fitted networks
//! can serve predictions from shared references. Convolution is valid
//! cross-correlation with stride 1; pooling floors odd lengths.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::seed::StreamRng;

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;

/// Fan-in-scaled uniform init, the standard default for conv and dense
/// weights; biases use the same bound.
fn uniform_init(rng: &mut StreamRng, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv1d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    /// Weights laid out [c_out][c_in][kernel].
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(skip)]
    pub gw: Vec<f64>,
    #[serde(skip)]
    pub gb: Vec<f64>,
    #[serde(skip)]
    cache_x: Option<Tensor>,
}

impl Conv1d {
    pub fn init(c_in: usize, c_out: usize, kernel: usize, rng: &mut StreamRng) -> Conv1d {
        let fan_in = c_in * kernel;
        Conv1d {
            c_in,
            c_out,
            kernel,
            w: uniform_init(rng, c_out * c_in * kernel, fan_in),
            b: uniform_init(rng, c_out, fan_in),
            gw: alloc::vec![0.0; c_out * c_in * kernel],
            gb: alloc::vec![0.0; c_out],
            cache_x: None,
        }
    }

    fn run(&self, x: &Tensor) -> Tensor {
        let (batch, c_in, l) = (x.dim(0), x.dim(1), x.dim(2));
        debug_assert_eq!(c_in, self.c_in);
        let l_out = l - self.kernel + 1;
        let mut out = Tensor::zeros(alloc::vec![batch, self.c_out, l_out]);
        for bi in 0..batch {
            for o in 0..self.c_out {
                let out_row =
                    &mut out.data[(bi * self.c_out + o) * l_out..(bi * self.c_out + o + 1) * l_out];
                out_row.iter_mut().for_each(|v| *v = self.b[o]);
                for i in 0..self.c_in {
                    let x_row = &x.data[(bi * c_in + i) * l..(bi * c_in + i + 1) * l];
                    let w_row = &self.w[(o * self.c_in + i) * self.kernel
                        ..(o * self.c_in + i + 1) * self.kernel];
                    for (t, &wv) in w_row.iter().enumerate() {
                        for (ov, &xv) in out_row.iter_mut().zip(&x_row[t..t + l_out]) {
                            *ov += wv * xv;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let out = self.run(x);
        self.cache_x = Some(x.clone());
        out
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        self.run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let x = self.cache_x.as_ref().expect("backward before forward");
        let (batch, c_in, l) = (x.dim(0), x.dim(1), x.dim(2));
        let l_out = l - self.kernel + 1;
        let mut dx = Tensor::zeros(alloc::vec![batch, c_in, l]);
        for bi in 0..batch {
            for o in 0..self.c_out {
                let g_row =
                    &grad.data[(bi * self.c_out + o) * l_out..(bi * self.c_out + o + 1) * l_out];
                self.gb[o] += g_row.iter().sum::<f64>();
                for i in 0..self.c_in {
                    let x_row = &x.data[(bi * c_in + i) * l..(bi * c_in + i + 1) * l];
                    let dx_row = &mut dx.data[(bi * c_in + i) * l..(bi * c_in + i + 1) * l];
                    let w_base = (o * self.c_in + i) * self.kernel;
                    for t in 0..self.kernel {
                        let mut acc = 0.0;
                        let wv = self.w[w_base + t];
                        for (j, &gv) in g_row.iter().enumerate() {
                            acc += x_row[j + t] * gv;
                            dx_row[j + t] += wv * gv;
                        }
                        self.gw[w_base + t] += acc;
                    }
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Weights laid out [n_out][n_in].
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(skip)]
    pub gw: Vec<f64>,
    #[serde(skip)]
    pub gb: Vec<f64>,
    #[serde(skip)]
    cache_x: Option<Tensor>,
}

impl Dense {
    pub fn init(n_in: usize, n_out: usize, rng: &mut StreamRng) -> Dense {
        Dense {
            n_in,
            n_out,
            w: uniform_init(rng, n_out * n_in, n_in),
            b: uniform_init(rng, n_out, n_in),
            gw: alloc::vec![0.0; n_out * n_in],
            gb: alloc::vec![0.0; n_out],
            cache_x: None,
        }
    }

    fn run(&self, x: &Tensor) -> Tensor {
        let batch = x.dim(0);
        debug_assert_eq!(x.dim(1), self.n_in);
        let mut out = Tensor::zeros(alloc::vec![batch, self.n_out]);
        for bi in 0..batch {
            let x_row = &x.data[bi * self.n_in..(bi + 1) * self.n_in];
            let out_row = &mut out.data[bi * self.n_out..(bi + 1) * self.n_out];
            for (o, ov) in out_row.iter_mut().enumerate() {
                let w_row = &self.w[o * self.n_in..(o + 1) * self.n_in];
                *ov = self.b[o] + dot(w_row, x_row);
            }
        }
        out
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let out = self.run(x);
        self.cache_x = Some(x.clone());
        out
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        self.run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let x = self.cache_x.as_ref().expect("backward before forward");
        let batch = x.dim(0);
        let mut dx = Tensor::zeros(alloc::vec![batch, self.n_in]);
        for bi in 0..batch {
            let x_row = &x.data[bi * self.n_in..(bi + 1) * self.n_in];
            let g_row = &grad.data[bi * self.n_out..(bi + 1) * self.n_out];
            let dx_row = &mut dx.data[bi * self.n_in..(bi + 1) * self.n_in];
            for (o, &gv) in g_row.iter().enumerate() {
                self.gb[o] += gv;
                let w_row = &self.w[o * self.n_in..(o + 1) * self.n_in];
                let gw_row = &mut self.gw[o * self.n_in..(o + 1) * self.n_in];
                for i in 0..self.n_in {
                    gw_row[i] += gv * x_row[i];
                    dx_row[i] += gv * w_row[i];
                }
            }
        }
        dx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Batch normalization over the batch (and length, for rank-3 inputs), per
/// channel/feature. Train mode normalizes with batch statistics (biased
/// variance) and updates running statistics (unbiased variance); eval mode
/// uses the running statistics only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    pub features: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    #[serde(skip)]
    pub ggamma: Vec<f64>,
    #[serde(skip)]
    pub gbeta: Vec<f64>,
    #[serde(skip)]
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn init(features: usize) -> BatchNorm {
        BatchNorm {
            features,
            gamma: alloc::vec![1.0; features],
            beta: alloc::vec![0.0; features],
            running_mean: alloc::vec![0.0; features],
            running_var: alloc::vec![1.0; features],
            ggamma: alloc::vec![0.0; features],
            gbeta: alloc::vec![0.0; features],
            cache: None,
        }
    }

    /// (batch, features, length) geometry; rank-2 inputs have length 1.
    fn geometry(x: &Tensor) -> (usize, usize, usize) {
        match x.rank() {
            2 => (x.dim(0), x.dim(1), 1),
            3 => (x.dim(0), x.dim(1), x.dim(2)),
            r => panic!("batchnorm expects rank 2 or 3, got {r}"),
        }
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let (batch, c, l) = Self::geometry(x);
        debug_assert_eq!(c, self.features);
        let m = (batch * l) as f64;
        let mut out = Tensor::zeros(x.shape.clone());
        let mut xhat = Tensor::zeros(x.shape.clone());
        let mut inv_std = alloc::vec![0.0f64; c];
        for ch in 0..c {
            let mut mean = 0.0;
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    mean += x.data[base + t];
                }
            }
            mean /= m;
            let mut var = 0.0;
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    let d = x.data[base + t] - mean;
                    var += d * d;
                }
            }
            var /= m;
            let istd = 1.0 / (var + BATCHNORM_EPS).sqrt();
            inv_std[ch] = istd;
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    let h = (x.data[base + t] - mean) * istd;
                    xhat.data[base + t] = h;
                    out.data[base + t] = self.gamma[ch] * h + self.beta[ch];
                }
            }
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            self.running_mean[ch] =
                (1.0 - BATCHNORM_MOMENTUM) * self.running_mean[ch] + BATCHNORM_MOMENTUM * mean;
            self.running_var[ch] =
                (1.0 - BATCHNORM_MOMENTUM) * self.running_var[ch] + BATCHNORM_MOMENTUM * unbiased;
        }
        self.cache = Some(BnCache { xhat, inv_std });
        out
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let (batch, c, l) = Self::geometry(x);
        debug_assert_eq!(c, self.features);
        let mut out = Tensor::zeros(x.shape.clone());
        for ch in 0..c {
            let istd = 1.0 / (self.running_var[ch] + BATCHNORM_EPS).sqrt();
            let mean = self.running_mean[ch];
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    out.data[base + t] =
                        self.gamma[ch] * (x.data[base + t] - mean) * istd + self.beta[ch];
                }
            }
        }
        out
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let cache = self.cache.as_ref().expect("backward before forward");
        let (batch, c, l) = Self::geometry(grad);
        let m = (batch * l) as f64;
        let mut dx = Tensor::zeros(grad.shape.clone());
        for ch in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    let dy = grad.data[base + t];
                    sum_dy += dy;
                    sum_dy_xhat += dy * cache.xhat.data[base + t];
                }
            }
            self.gbeta[ch] += sum_dy;
            self.ggamma[ch] += sum_dy_xhat;
            let scale = self.gamma[ch] * cache.inv_std[ch] / m;
            for bi in 0..batch {
                let base = (bi * c + ch) * l;
                for t in 0..l {
                    let dy = grad.data[base + t];
                    dx.data[base + t] = scale
                        * (m * dy - sum_dy - cache.xhat.data[base + t] * sum_dy_xhat);
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    mask: Vec<bool>,
}

impl Relu {
    fn run(x: &Tensor) -> Tensor {
        Tensor::new(
            x.shape.clone(),
            x.data.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        )
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        Self::run(x)
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        Self::run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        Tensor::new(
            grad.shape.clone(),
            grad.data
                .iter()
                .zip(&self.mask)
                .map(|(&g, &m)| if m { g } else { 0.0 })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvgPool {
    pub size: usize,
    #[serde(skip)]
    in_len: usize,
}

impl AvgPool {
    pub fn new(size: usize) -> AvgPool {
        AvgPool { size, in_len: 0 }
    }

    fn run(&self, x: &Tensor) -> Tensor {
        let (batch, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        let l_out = l / self.size; // odd tails are dropped
        let mut out = Tensor::zeros(alloc::vec![batch, c, l_out]);
        let inv = 1.0 / self.size as f64;
        for bc in 0..batch * c {
            let x_row = &x.data[bc * l..(bc + 1) * l];
            let out_row = &mut out.data[bc * l_out..(bc + 1) * l_out];
            for (j, ov) in out_row.iter_mut().enumerate() {
                *ov = x_row[j * self.size..(j + 1) * self.size].iter().sum::<f64>() * inv;
            }
        }
        out
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        self.in_len = x.dim(2);
        self.run(x)
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        self.run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (batch, c, l_out) = (grad.dim(0), grad.dim(1), grad.dim(2));
        let l = self.in_len;
        let inv = 1.0 / self.size as f64;
        let mut dx = Tensor::zeros(alloc::vec![batch, c, l]);
        for bc in 0..batch * c {
            let g_row = &grad.data[bc * l_out..(bc + 1) * l_out];
            let dx_row = &mut dx.data[bc * l..(bc + 1) * l];
            for (j, &gv) in g_row.iter().enumerate() {
                for t in 0..self.size {
                    dx_row[j * self.size + t] = gv * inv;
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPool {
    pub size: usize,
    #[serde(skip)]
    in_len: usize,
    #[serde(skip)]
    argmax: Vec<usize>,
}

impl MaxPool {
    pub fn new(size: usize) -> MaxPool {
        MaxPool {
            size,
            in_len: 0,
            argmax: Vec::new(),
        }
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        self.in_len = x.dim(2);
        let (out, arg) = self.run_collect(x);
        self.argmax = arg;
        out
    }

    fn run_collect(&self, x: &Tensor) -> (Tensor, Vec<usize>) {
        let (batch, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        let l_out = l / self.size;
        let mut out = Tensor::zeros(alloc::vec![batch, c, l_out]);
        let mut arg = Vec::with_capacity(batch * c * l_out);
        for bc in 0..batch * c {
            let x_row = &x.data[bc * l..(bc + 1) * l];
            let out_row = &mut out.data[bc * l_out..(bc + 1) * l_out];
            for (j, ov) in out_row.iter_mut().enumerate() {
                let window = &x_row[j * self.size..(j + 1) * self.size];
                let mut best = 0;
                for (t, &v) in window.iter().enumerate() {
                    if v > window[best] {
                        best = t;
                    }
                }
                *ov = window[best];
                arg.push(bc * l + j * self.size + best);
            }
        }
        (out, arg)
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        self.run_collect(x).0
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (batch, c, _) = (grad.dim(0), grad.dim(1), grad.dim(2));
        let mut dx = Tensor::zeros(alloc::vec![batch, c, self.in_len]);
        for (&idx, &gv) in self.argmax.iter().zip(&grad.data) {
            dx.data[idx] += gv;
        }
        dx
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Flatten {
    #[serde(skip)]
    in_shape: Vec<usize>,
}

impl Flatten {
    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        self.in_shape = x.shape.clone();
        Self::run(x)
    }

    fn run(x: &Tensor) -> Tensor {
        let batch = x.dim(0);
        let rest: usize = x.shape[1..].iter().product();
        Tensor::new(alloc::vec![batch, rest], x.data.clone())
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        Self::run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        Tensor::new(self.in_shape.clone(), grad.data.clone())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GlobalAvgPool {
    #[serde(skip)]
    in_len: usize,
}

impl GlobalAvgPool {
    fn run(x: &Tensor) -> Tensor {
        let (batch, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        let mut out = Tensor::zeros(alloc::vec![batch, c]);
        for bc in 0..batch * c {
            out.data[bc] = x.data[bc * l..(bc + 1) * l].iter().sum::<f64>() / l as f64;
        }
        out
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        self.in_len = x.dim(2);
        Self::run(x)
    }

    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        Self::run(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let (batch, c) = (grad.dim(0), grad.dim(1));
        let l = self.in_len;
        let inv = 1.0 / l as f64;
        let mut dx = Tensor::zeros(alloc::vec![batch, c, l]);
        for bc in 0..batch * c {
            let gv = grad.data[bc] * inv;
            for t in 0..l {
                dx.data[bc * l + t] = gv;
            }
        }
        dx
    }
}

/// Row-wise stable softmax.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let (batch, k) = (logits.dim(0), logits.dim(1));
    let mut out = Tensor::zeros(logits.shape.clone());
    for bi in 0..batch {
        let row = &logits.data[bi * k..(bi + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - max).exp();
            out.data[bi * k + j] = e;
            total += e;
        }
        for j in 0..k {
            out.data[bi * k + j] /= total;
        }
    }
    out
}

/// Fused softmax + categorical cross-entropy.
///
/// Returns the mean loss over the batch and the gradient with respect to the
/// logits, `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let (batch, k) = (logits.dim(0), logits.dim(1));
    debug_assert_eq!(batch, targets.len());
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let inv_b = 1.0 / batch as f64;
    for (bi, &t) in targets.iter().enumerate() {
        loss -= probs.data[bi * k + t].max(1e-300).ln();
        grad.data[bi * k + t] -= 1.0;
    }
    for g in &mut grad.data {
        *g *= inv_b;
    }
    (loss * inv_b, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use alloc::vec;
    use approx::assert_relative_eq;

    /// Manual cross-correlation oracle: [1,2,3] * [1,0,-1] = [-2].
    #[test]
    fn conv_matches_hand_cross_correlation() {
        let mut rng = stream_rng(0, &[]);
        let mut conv = Conv1d::init(1, 1, 3, &mut rng);
        conv.w = vec![1.0, 0.0, -1.0];
        conv.b = vec![0.0];
        let x = Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]);
        let out = conv.forward_eval(&x);
        assert_eq!(out.shape, vec![1, 1, 1]);
        assert_relative_eq!(out.data[0], -2.0);
    }

    /// The identity kernel [1] reproduces the input.
    #[test]
    fn conv_identity_kernel() {
        let mut rng = stream_rng(0, &[]);
        let mut conv = Conv1d::init(1, 1, 1, &mut rng);
        conv.w = vec![1.0];
        conv.b = vec![0.0];
        let x = Tensor::new(vec![1, 1, 4], vec![0.5, -1.0, 2.0, 7.0]);
        let out = conv.forward_eval(&x);
        assert_eq!(out.data, x.data);
    }

    /// Valid convolution arithmetic: 728 input, kernel 9 gives 720.
    #[test]
    fn conv_output_length() {
        let mut rng = stream_rng(0, &[]);
        let mut conv = Conv1d::init(1, 2, 9, &mut rng);
        let x = Tensor::zeros(vec![1, 1, 728]);
        let out = conv.forward_train(&x);
        assert_eq!(out.shape, vec![1, 2, 720]);
    }

    #[test]
    fn relu_forward_and_mask() {
        let mut relu = Relu::default();
        let x = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]);
        let out = relu.forward_train(&x);
        assert_eq!(out.data, vec![0.0, 0.0, 2.0]);
        let grad = Tensor::new(vec![1, 3], vec![1.0, 1.0, 1.0]);
        let dx = relu.backward(&grad);
        assert_eq!(dx.data, vec![0.0, 0.0, 1.0]);
    }

    /// Train-mode batchnorm output has per-channel mean 0 and variance 1
    /// (before the affine map).
    #[test]
    fn batchnorm_normalizes_in_train_mode() {
        let mut bn = BatchNorm::init(3);
        let mut rng = stream_rng(5, &[]);
        let x = Tensor::new(
            vec![8, 3, 5],
            (0..8 * 3 * 5).map(|_| rng.random_range(-3.0..5.0)).collect(),
        );
        let out = bn.forward_train(&x);
        for ch in 0..3 {
            let mut values = Vec::new();
            for bi in 0..8 {
                let base = (bi * 3 + ch) * 5;
                values.extend_from_slice(&out.data[base..base + 5]);
            }
            let m = values.iter().sum::<f64>() / values.len() as f64;
            let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64;
            assert!(m.abs() < 1e-9, "mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "var {v}"); // eps shifts it slightly
        }
    }

    /// Eval mode uses running statistics only: two different batch
    /// compositions give identical per-row outputs.
    #[test]
    fn batchnorm_eval_is_composition_independent() {
        let mut bn = BatchNorm::init(2);
        let mut rng = stream_rng(6, &[]);
        for _ in 0..5 {
            let x = Tensor::new(
                vec![6, 2, 4],
                (0..6 * 2 * 4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            bn.forward_train(&x);
        }
        let row: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let solo = Tensor::new(vec![1, 2, 4], row.clone());
        let mut padded_data = row.clone();
        padded_data.extend((0..8).map(|i| -(i as f64)));
        let padded = Tensor::new(vec![2, 2, 4], padded_data);
        let a = bn.forward_eval(&solo);
        let b = bn.forward_eval(&padded);
        for i in 0..8 {
            assert_relative_eq!(a.data[i], b.data[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn avgpool_halves_and_floors() {
        let mut pool = AvgPool::new(2);
        let x = Tensor::new(vec![1, 1, 5], vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        let out = pool.forward_train(&x);
        assert_eq!(out.shape, vec![1, 1, 2]);
        assert_eq!(out.data, vec![2.0, 6.0]); // the trailing 9 is dropped
        let dx = pool.backward(&Tensor::new(vec![1, 1, 2], vec![2.0, 4.0]));
        assert_eq!(dx.data, vec![1.0, 1.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let mut pool = MaxPool::new(2);
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 3.0, 5.0, 2.0]);
        let out = pool.forward_train(&x);
        assert_eq!(out.data, vec![3.0, 5.0]);
        let dx = pool.backward(&Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]));
        assert_eq!(dx.data, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let probs = softmax_rows(&Tensor::zeros(vec![1, 4]));
        for &p in &probs.data {
            assert_relative_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    /// Cross-entropy of a perfect prediction is ~0; uniform logits give ln K.
    #[test]
    fn cross_entropy_limits() {
        let perfect = Tensor::new(vec![1, 4], vec![100.0, 0.0, 0.0, 0.0]);
        let (loss, _) = softmax_cross_entropy(&perfect, &[0]);
        assert!(loss < 1e-9);
        let uniform = Tensor::zeros(vec![1, 4]);
        let (loss, grad) = softmax_cross_entropy(&uniform, &[2]);
        assert_relative_eq!(loss, (4.0f64).ln(), epsilon = 1e-12);
        // Gradient is (p - onehot) / batch.
        assert_relative_eq!(grad.data[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(grad.data[2], -0.75, epsilon = 1e-12);
    }
}
