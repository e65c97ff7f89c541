//! Adam optimizer and the training loop.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::softmax_cross_entropy;
use super::model::{ModelSpec, Network};
use super::tensor::Tensor;
use crate::dataset::{SpectraDataset, SplitIndices};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::seed::stream_rng;

/// Training protocol: optimizer settings, batch size, epochs, seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr: 1e-3,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0"));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1"));
        }
        Ok(())
    }

    /// The paper's per-architecture batch sizes (CNN 64, FullCNN 16,
    /// MHCNN 128, FC 64).
    pub fn batch_size_for(arch: super::model::ArchName) -> usize {
        match arch {
            super::model::ArchName::Cnn | super::model::ArchName::Fc => 64,
            super::model::ArchName::FullCnn => 16,
            super::model::ArchName::Mhcnn => 128,
        }
    }
}

/// Adam with bias correction. State vectors are laid out in the network's
/// parameter traversal order.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, net: &mut Network) -> Adam {
        let mut sizes = Vec::new();
        net.for_each_param(&mut |w, _| sizes.push(w.len()));
        Adam {
            lr: cfg.lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: sizes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| alloc::vec![0.0; n]).collect(),
        }
    }

    /// One update from the accumulated gradients:
    /// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, net: &mut Network) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (beta1, beta2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        let mut slot = 0usize;
        let (ms, vs) = (&mut self.m, &mut self.v);
        net.for_each_param(&mut |w, g| {
            let m = &mut ms[slot];
            let v = &mut vs[slot];
            for i in 0..w.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            slot += 1;
        });
    }
}

/// Loss/accuracy trace of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch with the highest validation accuracy, when a val split exists.
    pub best_val_epoch: Option<usize>,
}

/// Trains a model spec on the train part of `split`.
///
/// The dataset must already be prepared (728-bin grid, rescaled to [0, 1]).
/// Weight init and shuffling derive from `cfg.seed`, so a run is fully
/// reproducible. Per-epoch train loss (and val accuracy when a val split is
/// present) is recorded; a non-finite loss aborts with the failing epoch.
pub fn train(
    spec: &ModelSpec,
    d: &SpectraDataset,
    split: &SplitIndices,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    cfg.validate()?;
    let k = d.n_classes();
    let mut net = Network::init(spec, d.n_bins(), k, crate::seed::derive_seed(cfg.seed, &[0]))?;
    let mut adam = Adam::new(cfg, &mut net);
    let mut shuffle_rng = stream_rng(cfg.seed, &[1]);

    let mut order: Vec<usize> = split.train.to_vec();
    if order.is_empty() {
        return Err(Error::InvalidArgument("training split is empty"));
    }
    let n_train = order.len();
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = batch_tensor(d, chunk);
            let targets: Vec<usize> = chunk.iter().map(|&i| d.labels()[i]).collect();
            let logits = net.forward_train(&x);
            let (loss, grad) = softmax_cross_entropy(&logits, &targets);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            net.zero_grads();
            net.backward(&grad);
            adam.step(&mut net);
        }
        let val_accuracy = if split.val.is_empty() {
            None
        } else {
            let vx = d.rows().select_rows(&split.val);
            let truth: Vec<usize> = split.val.iter().map(|&i| d.labels()[i]).collect();
            let (pred, _) = net.predict(&vx)?;
            Some(evaluate(&pred, &truth, k)?.accuracy)
        };
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_train as f64,
            val_accuracy,
        });
    }
    history.best_val_epoch = history
        .epochs
        .iter()
        .filter_map(|e| e.val_accuracy.map(|a| (e.epoch, a)))
        .fold(None, |best: Option<(usize, f64)>, (e, a)| match best {
            Some((_, ba)) if ba >= a => best,
            _ => Some((e, a)),
        })
        .map(|(e, _)| e);
    Ok((net, history))
}

/// Gathers dataset rows into a flat [batch, n_bins] tensor.
pub fn batch_tensor(d: &SpectraDataset, rows: &[usize]) -> Tensor {
    let n_bins = d.n_bins();
    let mut data = Vec::with_capacity(rows.len() * n_bins);
    for &i in rows {
        data.extend_from_slice(d.rows().row(i));
    }
    Tensor::new(alloc::vec![rows.len(), n_bins], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::nn::model::{ArchName, build_model, LayerSpec};
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Closed-form first Adam step: with zero state,
    /// update = -lr * g / (|g| + eps).
    #[test]
    fn adam_first_step_closed_form() {
        let spec = ModelSpec {
            name: "tiny".to_string(),
            branches: vec![vec![LayerSpec::Dense { units: 2 }, LayerSpec::Softmax]],
            head: Vec::new(),
        };
        let cfg = TrainConfig {
            lr: 1e-3,
            ..TrainConfig::default()
        };
        let mut net = Network::init(&spec, 3, 2, 0).unwrap();
        let mut before: Vec<Vec<f64>> = Vec::new();
        net.for_each_param(&mut |w, _| before.push(w.clone()));

        // Hand-set gradients.
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut counter = 0.5;
        net.for_each_param(&mut |_, g| {
            for v in g.iter_mut() {
                *v = counter;
                counter += 0.25;
            }
            grads.push(g.clone());
        });

        let mut adam = Adam::new(&cfg, &mut net);
        adam.step(&mut net);

        let mut after: Vec<Vec<f64>> = Vec::new();
        net.for_each_param(&mut |w, _| after.push(w.clone()));
        for ((b, a), g) in before.iter().zip(&after).zip(&grads) {
            for ((bv, av), gv) in b.iter().zip(a).zip(g) {
                let expected = bv - 1e-3 * gv / (gv.abs() + 1e-8);
                assert_relative_eq!(*av, expected, epsilon = 1e-12);
            }
        }
    }

    fn toy_dataset(per_class: usize, bins: usize, seed: u64) -> SpectraDataset {
        let mut rng = stream_rng(seed, &[]);
        let grid: Vec<f64> = (0..bins).map(|i| 100.0 + i as f64).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2usize {
            for _ in 0..per_class {
                let center = bins / 4 + c * bins / 2;
                let row: Vec<f64> = (0..bins)
                    .map(|j| {
                        let d = (j as f64 - center as f64) / 4.0;
                        (-d * d).exp() + 0.05 * rng.random_range(-1.0..1.0)
                    })
                    .collect();
                rows.push(row);
                labels.push(c);
            }
        }
        SpectraDataset::new(
            grid,
            Matrix::from_rows(&rows).unwrap(),
            labels,
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn full_split(d: &SpectraDataset) -> SplitIndices {
        SplitIndices {
            train: (0..d.n_spectra()).collect(),
            val: Vec::new(),
            test: Vec::new(),
        }
    }

    /// Memorization oracle: a small CNN overfits ten samples to 100% train
    /// accuracy.
    #[test]
    fn tiny_cnn_memorizes_its_training_set() {
        let d = toy_dataset(5, 64, 3);
        let spec = ModelSpec {
            name: "small-cnn".to_string(),
            branches: vec![vec![
                LayerSpec::Conv1d { filters: 4, kernel: 5 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Avgpool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 16 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let cfg = TrainConfig {
            batch_size: 10,
            epochs: 200,
            seed: 5,
            ..TrainConfig::default()
        };
        let (net, history) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
        let (pred, _) = net.predict(d.rows()).unwrap();
        assert_eq!(pred, d.labels(), "failed to memorize");
        assert_eq!(history.epochs.len(), 200);
    }

    /// lr = 0 leaves every parameter untouched.
    #[test]
    fn zero_learning_rate_changes_nothing() {
        let d = toy_dataset(4, 32, 6);
        let spec = build_model(ArchName::Fc, 2);
        // Shrink to the dataset: rebuild a small FC.
        let spec = ModelSpec {
            name: spec.name,
            branches: vec![vec![
                LayerSpec::Dense { units: 8 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 3,
            lr: 0.0,
            seed: 1,
            ..TrainConfig::default()
        };
        let (net, _) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
        let mut reference =
            Network::init(&spec, d.n_bins(), 2, crate::seed::derive_seed(1, &[0])).unwrap();
        let mut trained = net;
        let mut pa: Vec<f64> = Vec::new();
        trained.for_each_param(&mut |w, _| pa.extend_from_slice(w));
        let mut pb: Vec<f64> = Vec::new();
        reference.for_each_param(&mut |w, _| pb.extend_from_slice(w));
        assert_eq!(pa, pb);
    }

    /// Loss strictly decreases over the first five Adam steps on an overfit
    /// toy for at least 9 of 10 seeds.
    #[test]
    fn early_loss_descends_for_most_seeds() {
        let d = toy_dataset(8, 48, 12);
        let spec = ModelSpec {
            name: "probe".to_string(),
            branches: vec![vec![
                LayerSpec::Conv1d { filters: 2, kernel: 5 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Avgpool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let mut passes = 0;
        for seed in 0..10u64 {
            // Full-batch training: one step per epoch.
            let cfg = TrainConfig {
                batch_size: d.n_spectra(),
                epochs: 6,
                seed,
                ..TrainConfig::default()
            };
            let (_, history) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
            let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
            // Epoch e loss is measured before step e+1's update has fully
            // settled; strict decrease over the first five steps.
            let decreasing = losses.windows(2).take(5).all(|w| w[1] < w[0]);
            if decreasing {
                passes += 1;
            }
        }
        assert!(passes >= 9, "only {passes} of 10 seeds descended");
    }

    /// Validation accuracy is tracked and the best epoch reported.
    #[test]
    fn history_records_validation() {
        let d = toy_dataset(10, 32, 9);
        let spec = ModelSpec {
            name: "probe".to_string(),
            branches: vec![vec![
                LayerSpec::Dense { units: 8 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let split = crate::dataset::stratified_split(&d, &[0.6, 0.2, 0.2], 4).unwrap();
        let cfg = TrainConfig {
            batch_size: 4,
            epochs: 10,
            seed: 2,
            ..TrainConfig::default()
        };
        let (_, history) = train(&spec, &d, &split, &cfg).unwrap();
        assert!(history.epochs.iter().all(|e| e.val_accuracy.is_some()));
        assert!(history.best_val_epoch.is_some());
    }

    /// Same seed, same run: training is deterministic.
    #[test]
    fn training_is_deterministic() {
        let d = toy_dataset(6, 32, 10);
        let spec = ModelSpec {
            name: "probe".to_string(),
            branches: vec![vec![
                LayerSpec::Dense { units: 6 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let cfg = TrainConfig {
            batch_size: 5,
            epochs: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let (net_a, hist_a) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
        let (net_b, hist_b) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
        let la: Vec<f64> = hist_a.epochs.iter().map(|e| e.train_loss).collect();
        let lb: Vec<f64> = hist_b.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(la, lb);
        let (pa, _) = net_a.predict(d.rows()).unwrap();
        let (pb, _) = net_b.predict(d.rows()).unwrap();
        assert_eq!(pa, pb);
    }

    /// Eval-mode prediction has no stochastic layers: identical calls give
    /// identical outputs, and probabilities sum to one.
    #[test]
    fn prediction_is_pure() {
        let d = toy_dataset(4, 32, 14);
        let spec = ModelSpec {
            name: "probe".to_string(),
            branches: vec![vec![
                LayerSpec::Conv1d { filters: 2, kernel: 3 },
                LayerSpec::Relu,
                LayerSpec::Batchnorm,
                LayerSpec::Maxpool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]],
            head: Vec::new(),
        };
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 2,
            seed: 3,
            ..TrainConfig::default()
        };
        let (net, _) = train(&spec, &d, &full_split(&d), &cfg).unwrap();
        let (pred_a, proba_a) = net.predict(d.rows()).unwrap();
        let (pred_b, proba_b) = net.predict(d.rows()).unwrap();
        assert_eq!(pred_a, pred_b);
        assert_eq!(proba_a, proba_b);
        for i in 0..proba_a.n_rows() {
            let total: f64 = proba_a.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            // Label is the argmax with ties to the smallest index.
            let row = proba_a.row(i);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            assert_eq!(pred_a[i], best);
        }
    }
}
