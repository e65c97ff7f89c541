//! Classification evaluation: accuracy and confusion matrices.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of evaluating one model run on one test set.
///
/// `confusion[t][p]` counts samples of true class `t` predicted as class `p`.
/// By construction `accuracy == trace / n_test` and the matrix sums to
/// `n_test`; [`EvalReport::validate`] re-checks both on deserialized reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
    pub seed: u64,
    pub model_name: String,
    pub noise_level: f64,
}

impl EvalReport {
    /// Attaches run context (model name, seed, noise level) to a report.
    pub fn with_context(mut self, model_name: &str, seed: u64, noise_level: f64) -> Self {
        self.model_name = String::from(model_name);
        self.seed = seed;
        self.noise_level = noise_level;
        self
    }

    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    /// Re-checks the accounting invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let k = self.confusion.len();
        if self.confusion.iter().any(|row| row.len() != k) {
            return Err(Error::Invariant("confusion matrix must be square".into()));
        }
        let total: usize = self.confusion.iter().flatten().sum();
        if total != self.n_test {
            return Err(Error::Invariant(
                "confusion matrix total differs from n_test".into(),
            ));
        }
        let trace: usize = (0..k).map(|i| self.confusion[i][i]).sum();
        let expect = if self.n_test == 0 {
            0.0
        } else {
            trace as f64 / self.n_test as f64
        };
        if (self.accuracy - expect).abs() > 1e-12 {
            return Err(Error::Invariant("accuracy differs from trace/n_test".into()));
        }
        Ok(())
    }
}

/// Tallies predictions against ground truth over `k` classes.
pub fn evaluate(pred: &[usize], truth: &[usize], k: usize) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes"));
    }
    let mut confusion = alloc::vec![alloc::vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k {
            return Err(Error::LabelOutOfRange { label: p, classes: k });
        }
        if t >= k {
            return Err(Error::LabelOutOfRange { label: t, classes: k });
        }
        confusion[t][p] += 1;
    }
    let n_test = pred.len();
    let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = if n_test == 0 {
        0.0
    } else {
        trace as f64 / n_test as f64
    };
    Ok(EvalReport {
        accuracy,
        confusion,
        n_test,
        seed: 0,
        model_name: String::new(),
        noise_level: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfect_predictions_give_diagonal_matrix() {
        let truth = vec![0, 1, 2, 0, 1, 2];
        let r = evaluate(&truth, &truth, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        r.validate().unwrap();
    }

    #[test]
    fn all_wrong_two_class_gives_antidiagonal() {
        let truth = vec![0, 0, 1, 1];
        let pred = vec![1, 1, 0, 0];
        let r = evaluate(&pred, &truth, 2).unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.confusion, vec![vec![0, 2], vec![2, 0]]);
    }

    /// Hand-tallied 6-sample case with two errors: accuracy 4/6 and the
    /// exact matrix.
    #[test]
    fn hand_tally_matches() {
        let truth = vec![0, 1, 2, 0, 1, 2];
        let pred = vec![0, 1, 2, 0, 2, 1];
        let r = evaluate(&pred, &truth, 3).unwrap();
        assert_eq!(r.accuracy, 4.0 / 6.0);
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 1, 1], vec![0, 1, 1]]);
        r.validate().unwrap();
    }

    #[test]
    fn mismatched_lengths_and_bad_labels_error() {
        assert!(evaluate(&[0, 1], &[0], 2).is_err());
        assert!(evaluate(&[0, 2], &[0, 1], 2).is_err());
        assert!(evaluate(&[0, 1], &[0, 5], 2).is_err());
    }

    #[test]
    fn validate_catches_tampered_reports() {
        let mut r = evaluate(&[0, 1], &[0, 1], 2).unwrap();
        r.accuracy = 0.5;
        assert!(r.validate().is_err());
    }
}
