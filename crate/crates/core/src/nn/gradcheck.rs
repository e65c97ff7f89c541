//! Central finite-difference gradient checks.
//!
//! Used by the unit tests here and by the acceptance suite: analytic
//! gradients from backpropagation are compared against central differences
//! of the scalar training loss at fp64 with step 1e-5, over a random probe
//! set of parameter and input coordinates.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::layers::softmax_cross_entropy;
use super::model::{LayerSpec, ModelSpec, Network};
use super::tensor::Tensor;
use crate::seed::stream_rng;

const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub n_checked: usize,
}

impl GradCheckReport {
    fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            n_checked: self.n_checked + other.n_checked,
        }
    }
}

/// Relative error with an absolute floor of 1: tiny absolute discrepancies
/// on tiny gradients do not register, real sign/scale bugs do.
fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

fn mutate_param(net: &mut Network, tensor_idx: usize, elem_idx: usize, delta: f64) {
    let mut slot = 0usize;
    net.for_each_param(&mut |w, _| {
        if slot == tensor_idx {
            w[elem_idx] += delta;
        }
        slot += 1;
    });
}

/// Checks one model end to end on random inputs. Probes
/// `probes_per_tensor` coordinates of every parameter tensor plus a sample
/// of input coordinates.
pub fn check_model(
    spec: &ModelSpec,
    input_len: usize,
    n_classes: usize,
    batch: usize,
    seed: u64,
    probes_per_tensor: usize,
) -> GradCheckReport {
    let mut rng = stream_rng(seed, &[17]);
    let mut net = Network::init(spec, input_len, n_classes, seed).expect("valid spec");
    let x = Tensor::new(
        alloc::vec![batch, input_len],
        (0..batch * input_len)
            .map(|_| rng.random_range(0.05..1.0))
            .collect(),
    );
    let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_classes)).collect();

    // Analytic gradients.
    net.zero_grads();
    let logits = net.forward_train(&x);
    let (_, dlogits) = softmax_cross_entropy(&logits, &targets);
    let dx = net.backward(&dlogits);
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    net.for_each_param(&mut |_, g| analytic.push(g.clone()));

    let loss_at = |net: &mut Network| -> f64 {
        softmax_cross_entropy(&net.forward_train(&x), &targets).0
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
    };
    for (t_idx, grads) in analytic.iter().enumerate() {
        let len = grads.len();
        let probes: Vec<usize> = if len <= probes_per_tensor {
            (0..len).collect()
        } else {
            (0..probes_per_tensor)
                .map(|_| rng.random_range(0..len))
                .collect()
        };
        for e_idx in probes {
            mutate_param(&mut net, t_idx, e_idx, STEP);
            let plus = loss_at(&mut net);
            mutate_param(&mut net, t_idx, e_idx, -2.0 * STEP);
            let minus = loss_at(&mut net);
            mutate_param(&mut net, t_idx, e_idx, STEP);
            let numeric = (plus - minus) / (2.0 * STEP);
            report.max_rel_error = report.max_rel_error.max(rel_error(grads[e_idx], numeric));
            report.n_checked += 1;
        }
    }

    // Input gradient probes.
    let mut x_probe = x.clone();
    let n_input_probes = (batch * input_len).min(probes_per_tensor * 4);
    for _ in 0..n_input_probes {
        let i = rng.random_range(0..x_probe.data.len());
        x_probe.data[i] += STEP;
        let plus = softmax_cross_entropy(&net.forward_train(&x_probe), &targets).0;
        x_probe.data[i] -= 2.0 * STEP;
        let minus = softmax_cross_entropy(&net.forward_train(&x_probe), &targets).0;
        x_probe.data[i] += STEP;
        let numeric = (plus - minus) / (2.0 * STEP);
        report.max_rel_error = report.max_rel_error.max(rel_error(dx.data[i], numeric));
        report.n_checked += 1;
    }
    report
}

/// Exercises every layer kind in isolation inside minimal stacks.
pub fn check_all_layers(seed: u64) -> GradCheckReport {
    use LayerSpec::*;
    let cases: Vec<(Vec<LayerSpec>, usize)> = alloc::vec![
        // (stack, input length)
        (alloc::vec![Conv1d { filters: 3, kernel: 3 }, Flatten, Dense { units: 3 }, Softmax], 12),
        (
            alloc::vec![
                Conv1d { filters: 2, kernel: 3 },
                Relu,
                Batchnorm,
                Avgpool { size: 2 },
                Flatten,
                Dense { units: 3 },
                Softmax
            ],
            14,
        ),
        (
            alloc::vec![
                Conv1d { filters: 2, kernel: 3 },
                Relu,
                Batchnorm,
                Maxpool { size: 2 },
                Flatten,
                Dense { units: 3 },
                Softmax
            ],
            14,
        ),
        (
            alloc::vec![
                Conv1d { filters: 3, kernel: 3 },
                Relu,
                Batchnorm,
                GlobalAvgpool,
                Softmax
            ],
            12,
        ),
        (
            alloc::vec![
                Dense { units: 6 },
                Relu,
                Batchnorm,
                Dense { units: 3 },
                Softmax
            ],
            8,
        ),
    ];
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        n_checked: 0,
    };
    for (i, (layers, input_len)) in cases.into_iter().enumerate() {
        let spec = ModelSpec {
            name: alloc::format!("layer-case-{i}"),
            branches: alloc::vec![layers],
            head: Vec::new(),
        };
        report = report.merge(check_model(&spec, input_len, 3, 4, seed + i as u64, 24));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{build_model, ArchName};

    #[test]
    fn every_layer_kind_passes_the_gradient_check() {
        let report = check_all_layers(2026);
        assert!(
            report.max_rel_error < 1e-6,
            "max relative error {} over {} probes",
            report.max_rel_error,
            report.n_checked
        );
    }

    /// End-to-end check on each reference architecture at reduced probe
    /// counts (the acceptance suite runs the full version).
    #[test]
    fn reference_architectures_pass_the_gradient_check() {
        for arch in ArchName::ALL {
            let spec = build_model(arch, 4);
            let report = check_model(&spec, 728, 4, 2, 7, 3);
            assert!(
                report.max_rel_error < 1e-6,
                "{}: max relative error {} over {} probes",
                arch.name(),
                report.max_rel_error,
                report.n_checked
            );
        }
    }
}
