//! Random forest: bagged CART trees with per-split feature subsampling.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{argmax_tie_low, FeatureSampler, TreeModel, TreeParams};
use super::{check_predict_data, check_training_data};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::seed::stream_rng;

/// Number of candidate features per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// floor(sqrt(n_features)), the usual forest default.
    #[default]
    Sqrt,
    /// All features at every split (no subsampling).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    /// Draw each tree's training set as n samples with replacement.
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            tree: TreeParams::default(),
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    n_classes: usize,
    n_features: usize,
}

impl ForestParams {
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<ForestModel> {
        let n_classes = check_training_data(x, y)?;
        if self.n_estimators == 0 {
            return Err(crate::error::Error::InvalidArgument(
                "forest needs at least one estimator",
            ));
        }
        let n = x.n_rows();
        let m_sqrt = integer_sqrt(x.n_cols()).max(1);
        let mut trees = Vec::with_capacity(self.n_estimators);
        for t in 0..self.n_estimators {
            // Tree t draws everything from the stream (seed, [t]).
            let mut rng = stream_rng(self.seed, &[t as u64]);
            let (bx, by);
            let (train_x, train_y): (&Matrix, &[usize]) = if self.bootstrap {
                let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                bx = x.select_rows(&indices);
                by = indices.iter().map(|&i| y[i]).collect::<Vec<_>>();
                (&bx, &by)
            } else {
                (x, y)
            };
            let tree = match self.max_features {
                MaxFeatures::All => {
                    self.tree
                        .fit_unchecked(train_x, train_y, n_classes, &mut FeatureSampler::All)
                }
                MaxFeatures::Sqrt => self.tree.fit_unchecked(
                    train_x,
                    train_y,
                    n_classes,
                    &mut FeatureSampler::Subset {
                        m: m_sqrt,
                        rng: &mut rng,
                    },
                ),
            };
            trees.push(tree);
        }
        Ok(ForestModel {
            trees,
            n_classes,
            n_features: x.n_cols(),
        })
    }
}

fn integer_sqrt(n: usize) -> usize {
    let mut r = 0usize;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl ForestModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Majority vote over trees, ties to the smallest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_predict_data(x, self.n_features)?;
        let mut out = Vec::with_capacity(x.n_rows());
        for row in x.rows_iter() {
            let mut votes = alloc::vec![0usize; self.n_classes];
            for tree in &self.trees {
                votes[tree.predict_row(row)] += 1;
            }
            out.push(argmax_tie_low(&votes));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;

    fn blobs(per_class: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = stream_rng(seed, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3usize {
            for _ in 0..per_class {
                rows.push(vec![
                    2.5 * c as f64 + rng.random_range(-1.0..1.0),
                    -1.5 * c as f64 + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    /// A degenerate one-tree forest without bootstrap or feature subsampling
    /// predicts exactly like the plain tree.
    #[test]
    fn single_tree_forest_equals_tree() {
        let (x, y) = blobs(20, 5);
        let forest = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::default()
        }
        .fit(&x, &y)
        .unwrap();
        let tree = TreeParams::default().fit(&x, &y).unwrap();
        let (qx, _) = blobs(10, 77);
        assert_eq!(forest.predict(&qx).unwrap(), tree.predict(&qx).unwrap());
    }

    #[test]
    fn same_seed_same_predictions() {
        let (x, y) = blobs(20, 6);
        let params = ForestParams {
            n_estimators: 12,
            ..ForestParams::default()
        };
        let a = params.fit(&x, &y).unwrap();
        let b = params.fit(&x, &y).unwrap();
        let (qx, _) = blobs(15, 99);
        assert_eq!(a.predict(&qx).unwrap(), b.predict(&qx).unwrap());

        let c = ForestParams {
            seed: 1,
            ..params
        }
        .fit(&x, &y)
        .unwrap();
        // Different seed gives a different ensemble (predictions may or may
        // not differ; the trees must).
        assert_eq!(c.n_trees(), 12);
    }

    #[test]
    fn forest_separates_blobs() {
        let (x, y) = blobs(30, 7);
        let forest = ForestParams {
            n_estimators: 25,
            ..ForestParams::default()
        }
        .fit(&x, &y)
        .unwrap();
        let pred = forest.predict(&x).unwrap();
        let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / y.len() as f64 > 0.95);
    }

    #[test]
    fn sqrt_feature_count() {
        assert_eq!(integer_sqrt(728), 26);
        assert_eq!(integer_sqrt(1), 1);
        assert_eq!(integer_sqrt(0), 0);
        assert_eq!(integer_sqrt(26 * 26), 26);
    }
}
