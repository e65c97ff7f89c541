//! Labeled spectra collections and stratified splitting.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::stream_rng;
use crate::spectrum::Spectrum;

/// A collection of spectra sharing one wavenumber grid, with a class label
/// per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraDataset {
    grid: Vec<f64>,
    rows: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl SpectraDataset {
    pub fn new(
        grid: Vec<f64>,
        rows: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if grid.len() < 2 || !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Invariant(
                "grid must be strictly increasing with >= 2 bins".into(),
            ));
        }
        if rows.n_cols() != grid.len() {
            return Err(Error::LengthMismatch {
                left: rows.n_cols(),
                right: grid.len(),
            });
        }
        if labels.len() != rows.n_rows() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: rows.n_rows(),
            });
        }
        if class_names.len() < 2 {
            return Err(Error::Invariant("need at least 2 classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: class_names.len(),
            });
        }
        if !rows.all_finite() {
            return Err(Error::NonFinite("dataset rows"));
        }
        Ok(Self {
            grid,
            rows,
            labels,
            class_names,
        })
    }

    #[inline]
    pub fn n_spectra(&self) -> usize {
        self.rows.n_rows()
    }

    #[inline]
    pub fn n_bins(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Rows per class, indexed by label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Reconstructs row `i` as a standalone spectrum (no metadata).
    pub fn spectrum(&self, i: usize) -> Spectrum {
        Spectrum::new(self.grid.clone(), self.rows.row(i).to_vec())
            .expect("dataset invariants imply a valid spectrum")
    }

    /// New dataset holding the given rows, in order. Grid and class names are
    /// shared unchanged.
    pub fn select(&self, indices: &[usize]) -> SpectraDataset {
        SpectraDataset {
            grid: self.grid.clone(),
            rows: self.rows.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Per-row affine rescale onto [0, 1]; constant rows become all zeros.
    pub fn rescaled01(&self) -> SpectraDataset {
        let mut out = self.clone();
        for i in 0..out.rows.n_rows() {
            let row = out.rows.row_mut(i);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in row.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                let span = hi - lo;
                for v in row.iter_mut() {
                    *v = (*v - lo) / span;
                }
            } else {
                for v in row.iter_mut() {
                    *v = 0.0;
                }
            }
        }
        out
    }

    /// Replaces the intensity matrix, keeping grid/labels/classes. The new
    /// matrix must have the same shape.
    pub fn with_rows(&self, rows: Matrix) -> Result<SpectraDataset> {
        SpectraDataset::new(
            self.grid.clone(),
            rows,
            self.labels.clone(),
            self.class_names.clone(),
        )
    }
}

/// Row indices of a train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Stratified split into 2 parts (train/test) or 3 parts (train/val/test).
///
/// Per class, rows are shuffled by a seed-derived stream and dealt out by the
/// largest-remainder method, so per-class counts in every part are within one
/// sample of exact proportionality. Deterministic for a fixed seed.
pub fn stratified_split(
    d: &SpectraDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<SplitIndices> {
    if fractions.len() < 2 || fractions.len() > 3 {
        return Err(Error::InvalidArgument("need 2 or 3 split fractions"));
    }
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::InvalidArgument("split fractions must be positive"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("split fractions must sum to 1"));
    }
    let n_parts = fractions.len();

    let mut per_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        per_class[l].push(i);
    }

    let mut parts: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_parts];
    for (c, indices) in per_class.iter_mut().enumerate() {
        if indices.len() < n_parts {
            return Err(Error::ClassTooSmall {
                class: d.class_names()[c].clone(),
                rows: indices.len(),
                parts: n_parts,
            });
        }
        let mut rng = stream_rng(seed, &[c as u64]);
        indices.shuffle(&mut rng);

        let counts = largest_remainder(indices.len(), fractions);
        let mut offset = 0;
        for (p, &count) in counts.iter().enumerate() {
            parts[p].extend_from_slice(&indices[offset..offset + count]);
            offset += count;
        }
    }

    let mut it = parts.into_iter();
    let train = it.next().unwrap();
    let (val, test) = if n_parts == 3 {
        (it.next().unwrap(), it.next().unwrap())
    } else {
        (Vec::new(), it.next().unwrap())
    };
    Ok(SplitIndices { train, val, test })
}

/// Apportions `n` items over parts proportional to `fractions`: floor first,
/// then one extra to the parts with the largest remainders (ties broken by
/// part index).
fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(fractions.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(fractions.len());
    let mut assigned = 0usize;
    for (p, &f) in fractions.iter().enumerate() {
        let exact = n as f64 * f;
        let base = exact as usize; // truncation == floor for non-negative
        counts.push(base);
        remainders.push((p, exact - base as f64));
        assigned += base;
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n.saturating_sub(assigned) {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    counts
}
