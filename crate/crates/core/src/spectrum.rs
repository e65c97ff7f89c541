//! Spectrum type and preprocessing operations.
//!
//! A [`Spectrum`] is a strictly increasing wavenumber axis plus an intensity
//! vector of the same length, with free-form string metadata. Operations are
//! pure: each returns a new spectrum and leaves the input untouched.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;

use alloc::string::String;
use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Lower edge of the standard classification grid (cm^-1).
pub const STANDARD_LO: f64 = 1450.0;
/// Upper edge of the standard classification grid (cm^-1).
pub const STANDARD_HI: f64 = 3152.4;
/// Number of bins on the standard grid.
pub const STANDARD_BINS: usize = 728;

/// Relative tolerance used when comparing wavenumbers against range edges,
/// so that grid points landing on an edge up to rounding are kept.
const EDGE_REL_TOL: f64 = 1e-9;

/// The uniform 728-point grid over [1450, 3152.4] cm^-1 that all prepared
/// datasets share (spacing ~= 2.3417 cm^-1).
pub fn standard_grid() -> Vec<f64> {
    uniform_grid(STANDARD_LO, STANDARD_HI, STANDARD_BINS)
}

/// Uniform grid of `n` points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo < hi, "need n >= 2 and lo < hi");
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// A single spectrum: wavenumber axis, intensities, and metadata tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis: Vec<f64>,
    intensity: Vec<f64>,
    meta: BTreeMap<String, String>,
}

impl Spectrum {
    /// Builds a spectrum, checking the type invariants: equal lengths >= 2,
    /// strictly increasing axis, finite intensities.
    pub fn new(axis: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if axis.len() != intensity.len() {
            return Err(Error::LengthMismatch {
                left: axis.len(),
                right: intensity.len(),
            });
        }
        if axis.len() < 2 {
            return Err(Error::Invariant("spectrum needs at least 2 bins".to_owned()));
        }
        if !axis.windows(2).all(|w| w[0] < w[1]) || !axis.iter().all(|v| v.is_finite()) {
            return Err(Error::Invariant(
                "axis must be finite and strictly increasing".to_owned(),
            ));
        }
        if !intensity.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("spectrum intensity"));
        }
        Ok(Self {
            axis,
            intensity,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.insert(key.to_owned(), value.to_owned());
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.axis.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    #[inline]
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    #[inline]
    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    /// Index of the maximum intensity (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.intensity.iter().enumerate() {
            if v > self.intensity[best] {
                best = i;
            }
        }
        best
    }

    /// Half-open index range of axis points inside `[lo - tol, hi + tol]`.
    fn bins_in(&self, lo: f64, hi: f64) -> (usize, usize) {
        let tol = EDGE_REL_TOL * (hi - lo).abs().max(1.0);
        let start = self.axis.partition_point(|&x| x < lo - tol);
        let end = self.axis.partition_point(|&x| x <= hi + tol);
        (start, end)
    }
}

/// Restricts a spectrum to the bins whose wavenumbers fall in `[lo, hi]`.
/// Intensities are carried over untouched.
pub fn crop(s: &Spectrum, lo: f64, hi: f64) -> Result<Spectrum> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument("crop requires lo < hi"));
    }
    let (start, end) = s.bins_in(lo, hi);
    if start >= end {
        return Err(Error::EmptyOverlap {
            lo,
            hi,
            axis_lo: s.axis[0],
            axis_hi: s.axis[s.len() - 1],
        });
    }
    Ok(Spectrum {
        axis: s.axis[start..end].to_vec(),
        intensity: s.intensity[start..end].to_vec(),
        meta: s.meta.clone(),
    })
}

/// Linearly interpolates a spectrum onto a new axis. Every grid point must
/// lie within the convex hull of the source axis; values at shared knots are
/// reproduced exactly.
pub fn resample(s: &Spectrum, grid: &[f64]) -> Result<Spectrum> {
    let (axis_lo, axis_hi) = (s.axis[0], s.axis[s.len() - 1]);
    let tol = EDGE_REL_TOL * (axis_hi - axis_lo).max(1.0);
    let mut out = Vec::with_capacity(grid.len());
    for &g in grid {
        if g < axis_lo - tol || g > axis_hi + tol {
            return Err(Error::OutsideHull {
                value: g,
                axis_lo,
                axis_hi,
            });
        }
        out.push(interp_clamped(&s.axis, &s.intensity, g));
    }
    Spectrum::new(grid.to_vec(), out).map(|sp| Spectrum {
        meta: s.meta.clone(),
        ..sp
    })
}

/// Piecewise-linear interpolation with boundary-value extension.
pub(crate) fn interp_clamped(axis: &[f64], values: &[f64], x: f64) -> f64 {
    let n = axis.len();
    if x <= axis[0] {
        return values[0];
    }
    if x >= axis[n - 1] {
        return values[n - 1];
    }
    // First index with axis[i] > x; the containing segment is [i-1, i].
    let i = axis.partition_point(|&a| a <= x);
    let (x0, x1) = (axis[i - 1], axis[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Key under which [`rescale01`] records a degenerate-input warning.
pub const RESCALE_WARNING_KEY: &str = "rescale_warning";

/// Affinely maps intensities onto [0, 1]. A constant input maps to all zeros
/// and is tagged with [`RESCALE_WARNING_KEY`] instead of erroring, so that
/// batch pipelines survive pathological rows.
pub fn rescale01(s: &Spectrum) -> Spectrum {
    let min = s.intensity.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s
        .intensity
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = s.clone();
    if max > min {
        let span = max - min;
        for v in &mut out.intensity {
            *v = (*v - min) / span;
        }
    } else {
        for v in &mut out.intensity {
            *v = 0.0;
        }
        out.meta
            .insert(RESCALE_WARNING_KEY.to_owned(), "constant input".to_owned());
    }
    out
}

/// Hampel filter: replaces any bin deviating from its sliding-window median
/// by more than `k` times the window MAD with that median. Windows are
/// truncated at the spectrum edges.
///
/// `window` is the full window width and must be odd and >= 3. The defaults
/// used for cosmic-ray removal are window 7, k = 5.
pub fn remove_cosmic_rays(s: &Spectrum, window: usize, k: f64) -> Result<Spectrum> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument("window must be odd and >= 3"));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument("k must be positive"));
    }
    let radius = window / 2;
    let n = s.len();
    let mut out = s.clone();
    let mut buf: Vec<f64> = Vec::with_capacity(window);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        buf.clear();
        buf.extend_from_slice(&s.intensity[lo..hi]);
        let med = median_inplace(&mut buf);
        let dev = (s.intensity[i] - med).abs();
        for v in &mut buf {
            *v = (*v - med).abs();
        }
        let mad = median_inplace(&mut buf);
        if dev > k * mad {
            out.intensity[i] = med;
        }
    }
    Ok(out)
}

/// Median of a scratch buffer (sorted in place; mean of middle two when even).
fn median_inplace(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite intensities"));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Default Hampel window used for cosmic-ray removal.
pub const HAMPEL_WINDOW: usize = 7;
/// Default Hampel MAD multiplier used for cosmic-ray removal.
pub const HAMPEL_K: f64 = 5.0;
