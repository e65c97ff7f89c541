//! Architecture specifications, shape propagation, and the runtime network.
//!
//! A [`ModelSpec`] is one or more branches of layers plus a head; sequential
//! networks use a single branch and an empty head, the multi-head network
//! concatenates three flattened branches before its final dense layer. The
//! trailing softmax is part of the declared spec but is applied outside the
//! runtime layer stack so training can fuse it with the cross-entropy.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layers::{
    softmax_rows, AvgPool, BatchNorm, Conv1d, Dense, Flatten, GlobalAvgPool, MaxPool, Relu,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::stream_rng;

/// One layer of an architecture description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    Relu,
    Batchnorm,
    Avgpool { size: usize },
    Maxpool { size: usize },
    Flatten,
    Dense { units: usize },
    GlobalAvgpool,
    Softmax,
}

impl LayerSpec {
    fn validate(&self) -> Result<()> {
        match self {
            LayerSpec::Conv1d { filters, kernel } => {
                if *filters == 0 || *kernel == 0 {
                    return Err(Error::Invariant(
                        "conv1d needs kernel >= 1 and filters >= 1".into(),
                    ));
                }
            }
            LayerSpec::Avgpool { size } | LayerSpec::Maxpool { size } => {
                if *size < 2 {
                    return Err(Error::Invariant("pool size must be >= 2".into()));
                }
            }
            LayerSpec::Dense { units } => {
                if *units == 0 {
                    return Err(Error::Invariant("dense units must be >= 1".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Activation geometry while propagating through a stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Chan { channels: usize, length: usize },
    Flat { features: usize },
}

impl Shape {
    pub fn features(&self) -> usize {
        match self {
            Shape::Chan { channels, length } => channels * length,
            Shape::Flat { features } => *features,
        }
    }
}

/// A named architecture: branches in parallel, then a head over the
/// concatenated branch outputs. Sequential models have one branch and an
/// empty head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub branches: Vec<Vec<LayerSpec>>,
    pub head: Vec<LayerSpec>,
}

/// The four reference architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchName {
    Fc,
    Cnn,
    FullCnn,
    Mhcnn,
}

impl ArchName {
    pub const ALL: [ArchName; 4] = [ArchName::Fc, ArchName::Cnn, ArchName::FullCnn, ArchName::Mhcnn];

    pub fn name(&self) -> &'static str {
        match self {
            ArchName::Fc => "FC",
            ArchName::Cnn => "CNN",
            ArchName::FullCnn => "FullCNN",
            ArchName::Mhcnn => "MHCNN",
        }
    }

    pub fn parse(name: &str) -> Option<ArchName> {
        ArchName::ALL.iter().copied().find(|a| a.name() == name)
    }
}

/// The five shared conv blocks of the CNN and FullCNN (kernel, filters).
const CONV_STACK: [(usize, usize); 5] = [(9, 2), (7, 2), (7, 4), (5, 8), (3, 12)];

/// Builds one of the reference architectures for `n_classes` outputs.
pub fn build_model(name: ArchName, n_classes: usize) -> ModelSpec {
    let mut layers: Vec<LayerSpec> = Vec::new();
    match name {
        ArchName::Fc => {
            // Seven dense layers, each followed by relu + batchnorm.
            for units in [1024usize, 512, 256, 128, 64, 16] {
                layers.push(LayerSpec::Dense { units });
                layers.push(LayerSpec::Relu);
                layers.push(LayerSpec::Batchnorm);
            }
            layers.push(LayerSpec::Dense { units: n_classes });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Batchnorm);
            layers.push(LayerSpec::Softmax);
            ModelSpec {
                name: name.name().to_string(),
                branches: alloc::vec![layers],
                head: Vec::new(),
            }
        }
        ArchName::Cnn => {
            for (kernel, filters) in CONV_STACK {
                layers.push(LayerSpec::Conv1d { filters, kernel });
                layers.push(LayerSpec::Relu);
                layers.push(LayerSpec::Batchnorm);
                layers.push(LayerSpec::Avgpool { size: 2 });
            }
            layers.push(LayerSpec::Flatten);
            layers.push(LayerSpec::Dense { units: 128 });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Batchnorm);
            layers.push(LayerSpec::Dense { units: n_classes });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Softmax);
            ModelSpec {
                name: name.name().to_string(),
                branches: alloc::vec![layers],
                head: Vec::new(),
            }
        }
        ArchName::FullCnn => {
            for (kernel, filters) in CONV_STACK {
                layers.push(LayerSpec::Conv1d { filters, kernel });
                layers.push(LayerSpec::Relu);
                layers.push(LayerSpec::Batchnorm);
                layers.push(LayerSpec::Avgpool { size: 2 });
            }
            // 1x1 conv down to one channel per class, then the 1x19 global
            // average pool.
            layers.push(LayerSpec::Conv1d {
                filters: n_classes,
                kernel: 1,
            });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::Batchnorm);
            layers.push(LayerSpec::GlobalAvgpool);
            layers.push(LayerSpec::Softmax);
            ModelSpec {
                name: name.name().to_string(),
                branches: alloc::vec![layers],
                head: Vec::new(),
            }
        }
        ArchName::Mhcnn => {
            let branch = |kernel: usize| -> Vec<LayerSpec> {
                alloc::vec![
                    LayerSpec::Conv1d { filters: 16, kernel },
                    LayerSpec::Relu,
                    LayerSpec::Batchnorm,
                    LayerSpec::Maxpool { size: 2 },
                    LayerSpec::Conv1d { filters: 4, kernel },
                    LayerSpec::Relu,
                    LayerSpec::Batchnorm,
                    LayerSpec::Maxpool { size: 2 },
                    LayerSpec::Flatten,
                ]
            };
            ModelSpec {
                name: name.name().to_string(),
                branches: alloc::vec![branch(3), branch(5), branch(7)],
                head: alloc::vec![LayerSpec::Dense { units: n_classes }, LayerSpec::Softmax],
            }
        }
    }
}

/// Per-layer shapes for one stack.
fn propagate_stack(layers: &[LayerSpec], entry: Shape) -> Result<Vec<Shape>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = entry;
    for layer in layers {
        layer.validate()?;
        current = match (*layer, current) {
            (LayerSpec::Conv1d { filters, kernel }, Shape::Chan { length, .. }) => {
                if length < kernel {
                    return Err(Error::ShapeMismatch(alloc::format!(
                        "conv kernel {kernel} exceeds length {length}"
                    )));
                }
                Shape::Chan {
                    channels: filters,
                    length: length - kernel + 1,
                }
            }
            (LayerSpec::Avgpool { size }, Shape::Chan { channels, length })
            | (LayerSpec::Maxpool { size }, Shape::Chan { channels, length }) => {
                if length < size {
                    return Err(Error::ShapeMismatch(alloc::format!(
                        "pool size {size} exceeds length {length}"
                    )));
                }
                Shape::Chan {
                    channels,
                    length: length / size,
                }
            }
            (LayerSpec::Relu, shape) | (LayerSpec::Batchnorm, shape) => shape,
            (LayerSpec::Flatten, Shape::Chan { channels, length }) => Shape::Flat {
                features: channels * length,
            },
            (LayerSpec::Dense { units }, Shape::Flat { .. }) => Shape::Flat { features: units },
            (LayerSpec::GlobalAvgpool, Shape::Chan { channels, .. }) => {
                Shape::Flat { features: channels }
            }
            (LayerSpec::Softmax, Shape::Flat { features }) => Shape::Flat { features },
            (layer, shape) => {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "layer {layer:?} cannot follow shape {shape:?}"
                )))
            }
        };
        shapes.push(current);
    }
    Ok(shapes)
}

/// Entry geometry of a stack: channelized for convolutional fronts, flat for
/// dense fronts.
fn entry_shape(first: Option<&LayerSpec>, input_len: usize) -> Shape {
    match first {
        Some(LayerSpec::Conv1d { .. })
        | Some(LayerSpec::Avgpool { .. })
        | Some(LayerSpec::Maxpool { .. })
        | Some(LayerSpec::GlobalAvgpool)
        | Some(LayerSpec::Flatten) => Shape::Chan {
            channels: 1,
            length: input_len,
        },
        _ => Shape::Flat {
            features: input_len,
        },
    }
}

/// Shape trace of a full model.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTrace {
    pub branches: Vec<Vec<Shape>>,
    pub merged: Shape,
    pub head: Vec<Shape>,
    pub output: Shape,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() || self.branches.iter().any(Vec::is_empty) {
            return Err(Error::Invariant("model needs at least one non-empty branch".into()));
        }
        // Softmax must be the very last layer and appear nowhere else.
        let all_layers: Vec<&LayerSpec> = self
            .branches
            .iter()
            .flatten()
            .chain(self.head.iter())
            .collect();
        let softmax_count = all_layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Softmax))
            .count();
        let last_is_softmax = if self.head.is_empty() {
            self.branches.len() == 1
                && matches!(self.branches[0].last(), Some(LayerSpec::Softmax))
        } else {
            matches!(self.head.last(), Some(LayerSpec::Softmax))
        };
        if softmax_count != 1 || !last_is_softmax {
            return Err(Error::Invariant(
                "softmax must appear exactly once, as the final layer".into(),
            ));
        }
        Ok(())
    }

    /// Propagates shapes from a given input length through every branch and
    /// the head.
    pub fn propagate(&self, input_len: usize) -> Result<ShapeTrace> {
        self.validate()?;
        let mut branch_shapes = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let entry = entry_shape(branch.first(), input_len);
            branch_shapes.push(propagate_stack(branch, entry)?);
        }
        let merged = if self.branches.len() == 1 {
            *branch_shapes[0].last().expect("non-empty branch")
        } else {
            let mut features = 0;
            for shapes in &branch_shapes {
                match shapes.last() {
                    Some(Shape::Flat { features: f }) => features += f,
                    other => {
                        return Err(Error::ShapeMismatch(alloc::format!(
                            "multi-head branches must end flat, got {other:?}"
                        )))
                    }
                }
            }
            Shape::Flat { features }
        };
        let head_shapes = propagate_stack(&self.head, merged)?;
        let output = *head_shapes.last().unwrap_or(&merged);
        Ok(ShapeTrace {
            branches: branch_shapes,
            merged,
            head: head_shapes,
            output,
        })
    }
}

/// A runtime layer instance with parameters and caches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RtLayer {
    Conv(Conv1d),
    Relu(Relu),
    Bn(BatchNorm),
    Avg(AvgPool),
    Max(MaxPool),
    Flatten(Flatten),
    Dense(Dense),
    Gap(GlobalAvgPool),
}

impl RtLayer {
    fn forward_train(&mut self, x: &Tensor) -> Tensor {
        match self {
            RtLayer::Conv(l) => l.forward_train(x),
            RtLayer::Relu(l) => l.forward_train(x),
            RtLayer::Bn(l) => l.forward_train(x),
            RtLayer::Avg(l) => l.forward_train(x),
            RtLayer::Max(l) => l.forward_train(x),
            RtLayer::Flatten(l) => l.forward_train(x),
            RtLayer::Dense(l) => l.forward_train(x),
            RtLayer::Gap(l) => l.forward_train(x),
        }
    }

    fn forward_eval(&self, x: &Tensor) -> Tensor {
        match self {
            RtLayer::Conv(l) => l.forward_eval(x),
            RtLayer::Relu(l) => l.forward_eval(x),
            RtLayer::Bn(l) => l.forward_eval(x),
            RtLayer::Avg(l) => l.forward_eval(x),
            RtLayer::Max(l) => l.forward_eval(x),
            RtLayer::Flatten(l) => l.forward_eval(x),
            RtLayer::Dense(l) => l.forward_eval(x),
            RtLayer::Gap(l) => l.forward_eval(x),
        }
    }

    fn backward(&mut self, grad: &Tensor) -> Tensor {
        match self {
            RtLayer::Conv(l) => l.backward(grad),
            RtLayer::Relu(l) => l.backward(grad),
            RtLayer::Bn(l) => l.backward(grad),
            RtLayer::Avg(l) => l.backward(grad),
            RtLayer::Max(l) => l.backward(grad),
            RtLayer::Flatten(l) => l.backward(grad),
            RtLayer::Dense(l) => l.backward(grad),
            RtLayer::Gap(l) => l.backward(grad),
        }
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Vec<f64>, &mut Vec<f64>)) {
        match self {
            RtLayer::Conv(l) => {
                f(&mut l.w, &mut l.gw);
                f(&mut l.b, &mut l.gb);
            }
            RtLayer::Dense(l) => {
                f(&mut l.w, &mut l.gw);
                f(&mut l.b, &mut l.gb);
            }
            RtLayer::Bn(l) => {
                f(&mut l.gamma, &mut l.ggamma);
                f(&mut l.beta, &mut l.gbeta);
            }
            _ => {}
        }
    }
}

/// A materialized network: spec + parameters + batchnorm running state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub spec: ModelSpec,
    pub input_len: usize,
    pub n_classes: usize,
    branches: Vec<Vec<RtLayer>>,
    head: Vec<RtLayer>,
    /// Flattened output width of each branch, fixed at init.
    branch_features: Vec<usize>,
}

impl Network {
    /// Instantiates and initializes a network. Weight draws are ordered by
    /// (branch, layer), so a fixed seed fully determines the parameters.
    pub fn init(spec: &ModelSpec, input_len: usize, n_classes: usize, seed: u64) -> Result<Network> {
        let trace = spec.propagate(input_len)?;
        match trace.output {
            Shape::Flat { features } if features == n_classes => {}
            other => {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "model output {other:?} does not match {n_classes} classes"
                )))
            }
        }
        let mut rng = stream_rng(seed, &[]);
        let mut build_stack = |layers: &[LayerSpec], entry: Shape| -> Vec<RtLayer> {
            let mut current = entry;
            let mut stack = Vec::new();
            for layer in layers {
                let (rt, next) = match (*layer, current) {
                    (LayerSpec::Conv1d { filters, kernel }, Shape::Chan { channels, length }) => (
                        Some(RtLayer::Conv(Conv1d::init(channels, filters, kernel, &mut rng))),
                        Shape::Chan {
                            channels: filters,
                            length: length - kernel + 1,
                        },
                    ),
                    (LayerSpec::Relu, shape) => (Some(RtLayer::Relu(Relu::default())), shape),
                    (LayerSpec::Batchnorm, shape) => {
                        let features = match shape {
                            Shape::Chan { channels, .. } => channels,
                            Shape::Flat { features } => features,
                        };
                        (Some(RtLayer::Bn(BatchNorm::init(features))), shape)
                    }
                    (LayerSpec::Avgpool { size }, Shape::Chan { channels, length }) => (
                        Some(RtLayer::Avg(AvgPool::new(size))),
                        Shape::Chan {
                            channels,
                            length: length / size,
                        },
                    ),
                    (LayerSpec::Maxpool { size }, Shape::Chan { channels, length }) => (
                        Some(RtLayer::Max(MaxPool::new(size))),
                        Shape::Chan {
                            channels,
                            length: length / size,
                        },
                    ),
                    (LayerSpec::Flatten, Shape::Chan { channels, length }) => (
                        Some(RtLayer::Flatten(Flatten::default())),
                        Shape::Flat {
                            features: channels * length,
                        },
                    ),
                    (LayerSpec::Dense { units }, Shape::Flat { features }) => (
                        Some(RtLayer::Dense(Dense::init(features, units, &mut rng))),
                        Shape::Flat { features: units },
                    ),
                    (LayerSpec::GlobalAvgpool, Shape::Chan { channels, .. }) => (
                        Some(RtLayer::Gap(GlobalAvgPool::default())),
                        Shape::Flat { features: channels },
                    ),
                    (LayerSpec::Softmax, shape) => (None, shape),
                    _ => unreachable!("propagate validated the stack"),
                };
                if let Some(rt) = rt {
                    stack.push(rt);
                }
                current = next;
            }
            stack
        };
        let branches: Vec<Vec<RtLayer>> = spec
            .branches
            .iter()
            .map(|branch| build_stack(branch, entry_shape(branch.first(), input_len)))
            .collect();
        let head = build_stack(&spec.head, trace.merged);
        let branch_features = trace
            .branches
            .iter()
            .map(|shapes| shapes.last().map(|s| s.features()).unwrap_or(input_len))
            .collect();
        Ok(Network {
            spec: spec.clone(),
            input_len,
            n_classes,
            branches,
            head,
            branch_features,
        })
    }

    /// Reshapes a flat [batch, input_len] tensor to a branch's entry shape.
    fn adapt(&self, branch: usize, x: &Tensor) -> Tensor {
        match entry_shape(self.spec.branches[branch].first(), self.input_len) {
            Shape::Chan { .. } => Tensor::new(
                alloc::vec![x.dim(0), 1, self.input_len],
                x.data.clone(),
            ),
            Shape::Flat { .. } => x.clone(),
        }
    }

    /// Training forward pass up to the logits (the trailing softmax is fused
    /// with the loss). Input is [batch, input_len].
    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let n_branches = self.branches.len();
        let mut outputs = Vec::with_capacity(n_branches);
        for b in 0..n_branches {
            let mut t = self.adapt(b, x);
            for layer in &mut self.branches[b] {
                t = layer.forward_train(&t);
                debug_assert!(t.all_finite(), "non-finite activation in training");
            }
            outputs.push(t);
        }
        let mut t = concat_flat(&outputs);
        for layer in &mut self.head {
            t = layer.forward_train(&t);
            debug_assert!(t.all_finite(), "non-finite activation in training");
        }
        t
    }

    /// Backward pass from the logit gradient; accumulates parameter grads
    /// and returns the gradient with respect to the flat input.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Tensor {
        let mut grad = grad_logits.clone();
        for layer in self.head.iter_mut().rev() {
            grad = layer.backward(&grad);
        }
        let parts = split_flat(&grad, &self.branch_features);
        let batch = grad_logits.dim(0);
        let mut dx = Tensor::zeros(alloc::vec![batch, self.input_len]);
        for (b, mut part) in parts.into_iter().enumerate() {
            for layer in self.branches[b].iter_mut().rev() {
                part = layer.backward(&part);
            }
            // Branch entry may be [B, 1, L]; fold back to [B, L].
            for (acc, &g) in dx.data.iter_mut().zip(&part.data) {
                *acc += g;
            }
        }
        dx
    }

    /// Pure inference pass to the logits (batchnorm uses running stats).
    pub fn forward_eval(&self, x: &Tensor) -> Tensor {
        let mut outputs = Vec::with_capacity(self.branches.len());
        for (b, branch) in self.branches.iter().enumerate() {
            let mut t = self.adapt(b, x);
            for layer in branch {
                t = layer.forward_eval(&t);
            }
            outputs.push(t);
        }
        let mut t = concat_flat(&outputs);
        for layer in &self.head {
            t = layer.forward_eval(&t);
        }
        t
    }

    /// Class probabilities and argmax labels for a matrix of rows.
    pub fn predict(&self, x: &Matrix) -> Result<(Vec<usize>, Matrix)> {
        if x.n_cols() != self.input_len {
            return Err(Error::LengthMismatch {
                left: x.n_cols(),
                right: self.input_len,
            });
        }
        let t = Tensor::new(alloc::vec![x.n_rows(), x.n_cols()], x.data().to_vec());
        let probs = softmax_rows(&self.forward_eval(&t));
        let k = self.n_classes;
        let mut labels = Vec::with_capacity(x.n_rows());
        for bi in 0..x.n_rows() {
            let row = &probs.data[bi * k..(bi + 1) * k];
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            labels.push(best);
        }
        Ok((labels, Matrix::from_vec(x.n_rows(), k, probs.data)?))
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param(&mut |_, g| g.iter_mut().for_each(|v| *v = 0.0));
    }

    /// Visits every (weights, grads) pair in a fixed traversal order.
    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Vec<f64>, &mut Vec<f64>)) {
        for branch in &mut self.branches {
            for layer in branch {
                layer.visit_params(f);
            }
        }
        for layer in &mut self.head {
            layer.visit_params(f);
        }
    }

    pub fn n_parameters(&mut self) -> usize {
        let mut total = 0;
        self.for_each_param(&mut |w, _| total += w.len());
        total
    }
}

/// Concatenates flat [B, F_i] tensors along the feature axis.
fn concat_flat(parts: &[Tensor]) -> Tensor {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let batch = parts[0].dim(0);
    let total: usize = parts.iter().map(|p| p.dim(1)).sum();
    let mut out = Tensor::zeros(alloc::vec![batch, total]);
    for bi in 0..batch {
        let mut offset = 0;
        for p in parts {
            let f = p.dim(1);
            out.data[bi * total + offset..bi * total + offset + f]
                .copy_from_slice(&p.data[bi * f..(bi + 1) * f]);
            offset += f;
        }
    }
    out
}

/// Splits a flat [B, sum(widths)] tensor back into per-branch tensors.
fn split_flat(t: &Tensor, widths: &[usize]) -> Vec<Tensor> {
    if widths.len() == 1 {
        return alloc::vec![t.clone()];
    }
    let batch = t.dim(0);
    let total = t.dim(1);
    let mut parts: Vec<Tensor> = widths
        .iter()
        .map(|&f| Tensor::zeros(alloc::vec![batch, f]))
        .collect();
    for bi in 0..batch {
        let mut offset = 0;
        for (p, &f) in parts.iter_mut().zip(widths) {
            p.data[bi * f..(bi + 1) * f]
                .copy_from_slice(&t.data[bi * total + offset..bi * total + offset + f]);
            offset += f;
        }
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// The published architecture geometry, from input length 728:
    /// CNN reaches length 19 with 12 channels (flatten 228), FullCNN pools
    /// 1x19, MHCNN concatenates 2144 features, FC runs
    /// 1024/512/256/128/64/16/4.
    #[test]
    fn reference_architectures_propagate_shapes() {
        let cnn = build_model(ArchName::Cnn, 4);
        let trace = cnn.propagate(728).unwrap();
        let shapes = &trace.branches[0];
        // After each conv block (conv + relu + bn + pool):
        assert_eq!(shapes[0], Shape::Chan { channels: 2, length: 720 });
        assert_eq!(shapes[3], Shape::Chan { channels: 2, length: 360 });
        assert_eq!(shapes[7], Shape::Chan { channels: 2, length: 177 });
        assert_eq!(shapes[11], Shape::Chan { channels: 4, length: 85 });
        assert_eq!(shapes[15], Shape::Chan { channels: 8, length: 40 });
        assert_eq!(shapes[19], Shape::Chan { channels: 12, length: 19 });
        // Flatten 12 * 19 = 228, dense 128, dense 4.
        assert_eq!(shapes[20], Shape::Flat { features: 228 });
        assert_eq!(shapes[21], Shape::Flat { features: 128 });
        assert_eq!(trace.output, Shape::Flat { features: 4 });

        let full = build_model(ArchName::FullCnn, 4);
        let trace = full.propagate(728).unwrap();
        let shapes = &trace.branches[0];
        // Pre-global-pool length is exactly 19.
        let pre_gap = shapes[shapes.len() - 3];
        assert_eq!(pre_gap, Shape::Chan { channels: 4, length: 19 });
        assert_eq!(trace.output, Shape::Flat { features: 4 });

        let mh = build_model(ArchName::Mhcnn, 4);
        let trace = mh.propagate(728).unwrap();
        let finals: Vec<usize> = trace
            .branches
            .iter()
            .map(|shapes| shapes.last().unwrap().features())
            .collect();
        assert_eq!(finals, vec![4 * 180, 4 * 179, 4 * 177]);
        assert_eq!(trace.merged, Shape::Flat { features: 2144 });
        assert_eq!(trace.output, Shape::Flat { features: 4 });

        let fc = build_model(ArchName::Fc, 4);
        let trace = fc.propagate(728).unwrap();
        let widths: Vec<usize> = trace.branches[0]
            .iter()
            .zip(&fc.branches[0])
            .filter(|(_, spec)| matches!(spec, LayerSpec::Dense { .. }))
            .map(|(shape, _)| shape.features())
            .collect();
        assert_eq!(widths, vec![1024, 512, 256, 128, 64, 16, 4]);
    }

    #[test]
    fn fc_has_seven_dense_layers() {
        let fc = build_model(ArchName::Fc, 4);
        let dense = fc.branches[0]
            .iter()
            .filter(|l| matches!(l, LayerSpec::Dense { .. }))
            .count();
        assert_eq!(dense, 7);
    }

    #[test]
    fn mhcnn_has_three_branches_with_kernels_3_5_7() {
        let mh = build_model(ArchName::Mhcnn, 4);
        assert_eq!(mh.branches.len(), 3);
        let kernels: Vec<usize> = mh
            .branches
            .iter()
            .map(|b| match b[0] {
                LayerSpec::Conv1d { kernel, .. } => kernel,
                _ => panic!("branch must start with a conv"),
            })
            .collect();
        assert_eq!(kernels, vec![3, 5, 7]);
    }

    #[test]
    fn misplaced_softmax_is_rejected() {
        let spec = ModelSpec {
            name: "bad".into(),
            branches: vec![vec![
                LayerSpec::Softmax,
                LayerSpec::Dense { units: 4 },
            ]],
            head: Vec::new(),
        };
        assert!(spec.validate().is_err());
        let missing = ModelSpec {
            name: "bad2".into(),
            branches: vec![vec![LayerSpec::Dense { units: 4 }]],
            head: Vec::new(),
        };
        assert!(missing.validate().is_err());
    }

    #[test]
    fn kernel_longer_than_input_is_an_error() {
        let spec = ModelSpec {
            name: "tiny".into(),
            branches: vec![vec![
                LayerSpec::Conv1d { filters: 1, kernel: 9 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        assert!(spec.propagate(4).is_err());
        assert!(spec.propagate(16).is_ok());
    }

    #[test]
    fn eval_forward_matches_shapes_and_is_repeatable() {
        let spec = build_model(ArchName::Cnn, 4);
        let net = Network::init(&spec, 728, 4, 9).unwrap();
        let x = Tensor::new(
            vec![3, 728],
            (0..3 * 728).map(|i| (i as f64 * 0.01).sin().abs()).collect(),
        );
        let a = net.forward_eval(&x);
        let b = net.forward_eval(&x);
        assert_eq!(a.shape, vec![3, 4]);
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let spec = build_model(ArchName::Mhcnn, 4);
        let flat_params = |net: &mut Network| {
            let mut all: Vec<f64> = Vec::new();
            net.for_each_param(&mut |w, _| all.extend_from_slice(w));
            all
        };
        let pa = flat_params(&mut Network::init(&spec, 728, 4, 42).unwrap());
        let pb = flat_params(&mut Network::init(&spec, 728, 4, 42).unwrap());
        let pc = flat_params(&mut Network::init(&spec, 728, 4, 43).unwrap());
        assert_eq!(pa, pb);
        assert_ne!(pa, pc);
    }
}
