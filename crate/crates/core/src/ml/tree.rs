//! CART decision tree with Gini impurity.
//!
//! The split search is exhaustive over midpoints of sorted distinct feature
//! values; ties go to the lowest feature index and then the lowest threshold.
//! Zero-gain splits are taken when a valid candidate exists (matching the
//! classic CART behavior on XOR-like data); recursion still terminates
//! because both children are strictly smaller.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_predict_data, check_training_data};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::seed::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum training samples in each leaf.
    pub min_leaf: usize,
    /// Minimum training samples required to consider splitting a node.
    pub min_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 1,
            min_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: u32,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_classes: usize,
    n_features: usize,
    depth: usize,
}

/// Which features a node's split search may consider.
pub(crate) enum FeatureSampler<'a> {
    All,
    /// A fresh subset of `m` features per node, drawn without replacement.
    Subset { m: usize, rng: &'a mut StreamRng },
}

impl TreeParams {
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<TreeModel> {
        let k = check_training_data(x, y)?;
        Ok(self.fit_unchecked(x, y, k, &mut FeatureSampler::All))
    }

    /// Training entry point shared with the forest: class count supplied by
    /// the caller (bootstrap samples may miss classes).
    pub(crate) fn fit_unchecked(
        &self,
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        sampler: &mut FeatureSampler,
    ) -> TreeModel {
        let mut builder = Builder {
            x,
            y,
            n_classes,
            params: *self,
            nodes: Vec::new(),
            scratch: Vec::new(),
            feature_pool: (0..x.n_cols()).collect(),
            depth: 0,
        };
        let mut indices: Vec<usize> = (0..x.n_rows()).collect();
        builder.build(&mut indices, 0, sampler);
        TreeModel {
            nodes: builder.nodes,
            n_classes,
            n_features: x.n_cols(),
            depth: builder.depth,
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u32)>,
    feature_pool: Vec<usize>,
    depth: usize,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    /// Builds the subtree over `indices` and returns its node id.
    fn build(&mut self, indices: &mut [usize], depth: usize, sampler: &mut FeatureSampler) -> u32 {
        self.depth = self.depth.max(depth);
        let counts = self.class_counts(indices);
        let majority = argmax_tie_low(&counts) as u32;
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = self.params.max_depth.map_or(true, |d| depth < d);

        if pure || indices.len() < self.params.min_split || !depth_ok {
            return self.push(Node::Leaf { class: majority });
        }
        let best = match self.find_best_split(indices, sampler) {
            Some(best) => best,
            None => return self.push(Node::Leaf { class: majority }),
        };

        // Partition in place around the threshold.
        let mid = partition(indices, |&i| {
            self.x.get(i, best.feature) <= best.threshold
        });
        let (left_idx, right_idx) = indices.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1, sampler);
        let right = self.build(right_idx, depth + 1, sampler);
        self.push(Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left,
            right,
        })
    }

    fn push(&mut self, node: Node) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.n_classes];
        for &i in indices {
            counts[self.y[i]] += 1;
        }
        counts
    }

    /// Exhaustive scan over candidate features, maximizing
    /// `sum_left^2/n_left + sum_right^2/n_right` (equivalent to minimizing
    /// weighted Gini impurity). First-found wins on exact ties.
    fn find_best_split(
        &mut self,
        indices: &[usize],
        sampler: &mut FeatureSampler,
    ) -> Option<BestSplit> {
        let n = indices.len();
        let min_leaf = self.params.min_leaf.max(1);
        let features: Vec<usize> = match sampler {
            FeatureSampler::All => (0..self.x.n_cols()).collect(),
            FeatureSampler::Subset { m, rng } => {
                // Partial Fisher-Yates, then sorted for deterministic
                // ascending iteration.
                let pool = &mut self.feature_pool;
                let m = (*m).min(pool.len());
                for t in 0..m {
                    let j = rand::Rng::random_range(&mut **rng, t..pool.len());
                    pool.swap(t, j);
                }
                let mut subset = pool[..m].to_vec();
                subset.sort_unstable();
                subset
            }
        };

        let mut best: Option<BestSplit> = None;
        let mut left_counts = alloc::vec![0usize; self.n_classes];
        for feature in features {
            self.scratch.clear();
            for &i in indices {
                self.scratch.push((self.x.get(i, feature), self.y[i] as u32));
            }
            self.scratch
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            left_counts.iter_mut().for_each(|c| *c = 0);
            let total_counts = self.class_counts(indices);
            let mut left_sq = 0.0f64;
            let mut right_sq: f64 = total_counts.iter().map(|&c| (c * c) as f64).sum();
            for t in 0..n - 1 {
                let class = self.scratch[t].1 as usize;
                let lc = left_counts[class] as f64;
                let rc = total_counts[class] as f64 - lc;
                left_sq += 2.0 * lc + 1.0;
                right_sq -= 2.0 * rc - 1.0;
                left_counts[class] += 1;

                let (v, v_next) = (self.scratch[t].0, self.scratch[t + 1].0);
                let n_left = t + 1;
                let n_right = n - n_left;
                if v >= v_next || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let score = left_sq / n_left as f64 + right_sq / n_right as f64;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(BestSplit {
                        score,
                        feature,
                        threshold: 0.5 * (v + v_next),
                    });
                }
            }
        }
        best
    }
}

/// Stable-order argmax with ties to the lowest index.
pub(crate) fn argmax_tie_low(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// In-place partition keeping relative order irrelevant; returns the pivot.
fn partition<T, F: Fn(&T) -> bool>(items: &mut [T], pred: F) -> usize {
    let mut store = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(store, i);
            store += 1;
        }
    }
    store
}

impl TreeModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of split levels (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut node = (self.nodes.len() - 1) as u32; // root is pushed last
        loop {
            match &self.nodes[node as usize] {
                Node::Leaf { class } => return *class as usize,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature as usize] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_predict_data(x, self.n_features)?;
        Ok(x.rows_iter().map(|row| self.predict_row(row)).collect())
    }
}
