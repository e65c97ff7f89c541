//! K-nearest neighbors with Minkowski distance.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_predict_data, check_training_data};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `k` neighbors under the Minkowski distance of order `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    /// Distance order; 1 = Manhattan, 2 = Euclidean.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5, p: 2.0 }
    }
}

/// Fitted KNN model; stores the training set verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    params: KnnParams,
    x: Matrix,
    y: Vec<usize>,
    n_classes: usize,
}

impl KnnParams {
    pub fn fit(&self, x: &Matrix, y: &[usize]) -> Result<KnnModel> {
        if self.k == 0 || self.k > x.n_rows() {
            return Err(Error::InvalidArgument("k must be in 1..=n_train"));
        }
        if !(self.p >= 1.0) {
            return Err(Error::InvalidArgument("distance order must be >= 1"));
        }
        let n_classes = check_training_data(x, y)?;
        Ok(KnnModel {
            params: *self,
            x: x.clone(),
            y: y.to_vec(),
            n_classes,
        })
    }
}

/// Minkowski distance raised to the p-th power (monotone in the distance,
/// which is all the neighbor ranking needs). Orders 1 and 2 take fast paths.
fn minkowski_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    } else if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum()
    }
}

impl KnnModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Majority vote among the `k` nearest training rows. Distance ties are
    /// broken by the smaller training-row index, vote ties by the smaller
    /// class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        check_predict_data(x, self.x.n_cols())?;
        let n_train = self.x.n_rows();
        let mut out = Vec::with_capacity(x.n_rows());
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n_train);
        for query in x.rows_iter() {
            scored.clear();
            for (i, row) in self.x.rows_iter().enumerate() {
                scored.push((minkowski_pow(query, row, self.params.p), i));
            }
            scored.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
            });
            let mut votes = alloc::vec![0usize; self.n_classes];
            for &(_, i) in &scored[..self.params.k] {
                votes[self.y[i]] += 1;
            }
            let mut best = 0;
            for (c, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = c;
                }
            }
            out.push(best);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn xy() -> (Matrix, Vec<usize>) {
        let x = Matrix::from_rows(&[
            vec![0.0, 0.1],
            vec![0.2, -0.1],
            vec![5.0, 5.2],
            vec![4.9, 5.0],
            vec![5.1, 4.8],
        ])
        .unwrap();
        (x, vec![0, 0, 1, 1, 1])
    }

    /// With k = 1 the nearest neighbor of a training row is itself.
    #[test]
    fn k1_training_set_accuracy_is_one() {
        let (x, y) = xy();
        let model = KnnParams { k: 1, p: 2.0 }.fit(&x, &y).unwrap();
        assert_eq!(model.predict(&x).unwrap(), y);
    }

    #[test]
    fn majority_vote_with_k3() {
        let (x, y) = xy();
        let model = KnnParams { k: 3, p: 2.0 }.fit(&x, &y).unwrap();
        let queries = Matrix::from_rows(&[vec![0.1, 0.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(model.predict(&queries).unwrap(), vec![0, 1]);
    }

    /// Vote ties resolve to the smallest class index.
    #[test]
    fn vote_ties_resolve_to_smallest_class()  {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![10.0], vec![12.0]]).unwrap();
        let y = vec![1, 1, 0, 0];
        let model = KnnParams { k: 4, p: 2.0 }.fit(&x, &y).unwrap();
        // All four neighbors vote 2:2; class 0 wins the tie.
        let q = Matrix::from_rows(&[vec![6.0]]).unwrap();
        assert_eq!(model.predict(&q).unwrap(), vec![0]);
    }

    /// Predictions depend only on the distance ordering, so a global strictly
    /// monotone transform of the inputs (uniform scaling) changes nothing.
    #[test]
    fn scale_invariance_of_predictions() {
        let (x, y) = xy();
        let queries = Matrix::from_rows(&[vec![1.0, 1.0], vec![4.0, 4.0], vec![2.6, 2.4]]).unwrap();
        let base = KnnParams { k: 3, p: 2.0 }.fit(&x, &y).unwrap().predict(&queries).unwrap();

        let scale = 7.3;
        let xs = Matrix::from_vec(
            x.n_rows(),
            x.n_cols(),
            x.data().iter().map(|v| v * scale).collect(),
        )
        .unwrap();
        let qs = Matrix::from_vec(
            queries.n_rows(),
            queries.n_cols(),
            queries.data().iter().map(|v| v * scale).collect(),
        )
        .unwrap();
        let scaled = KnnParams { k: 3, p: 2.0 }.fit(&xs, &y).unwrap().predict(&qs).unwrap();
        assert_eq!(base, scaled);
    }

    /// Permuting training rows leaves predictions unchanged (no exact
    /// distance ties in this data).
    #[test]
    fn training_order_does_not_matter() {
        let (x, y) = xy();
        let queries = Matrix::from_rows(&[vec![1.0, 1.0], vec![4.0, 4.0]]).unwrap();
        let base = KnnParams { k: 3, p: 1.0 }.fit(&x, &y).unwrap().predict(&queries).unwrap();

        let perm = [4usize, 2, 0, 3, 1];
        let xp = x.select_rows(&perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let permuted = KnnParams { k: 3, p: 1.0 }.fit(&xp, &yp).unwrap().predict(&queries).unwrap();
        assert_eq!(base, permuted);
    }

    #[test]
    fn parameter_validation() {
        let (x, y) = xy();
        assert!(KnnParams { k: 0, p: 2.0 }.fit(&x, &y).is_err());
        assert!(KnnParams { k: 9, p: 2.0 }.fit(&x, &y).is_err());
        assert!(KnnParams { k: 1, p: 0.5 }.fit(&x, &y).is_err());
    }
}
