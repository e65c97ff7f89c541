//! Crate-wide error type.

use alloc::string::String;

use crate::peakfit::VoigtParams;

/// Errors produced by core operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A requested wavenumber range does not intersect the spectrum axis.
    #[error("requested range [{lo}, {hi}] does not overlap the axis [{axis_lo}, {axis_hi}]")]
    EmptyOverlap {
        lo: f64,
        hi: f64,
        axis_lo: f64,
        axis_hi: f64,
    },
    /// A query grid extends outside the convex hull of the source axis.
    #[error("grid point {value} lies outside the axis hull [{axis_lo}, {axis_hi}]")]
    OutsideHull {
        value: f64,
        axis_lo: f64,
        axis_hi: f64,
    },
    /// A scalar argument violates its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    /// Construction would violate a type invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),
    /// Two sequences that must have equal lengths do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// A label value is not below the declared class count.
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    /// A class has too few rows for the requested split.
    #[error("class {class:?} has {rows} rows, fewer than the {parts} split parts")]
    ClassTooSmall {
        class: String,
        rows: usize,
        parts: usize,
    },
    /// Two generator profiles share a class name.
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    /// The peak fit did not converge; carries the best parameters seen.
    #[error("fit did not converge after {iterations} iterations (residual rms {residual_rms})")]
    NonConvergence {
        best: VoigtParams,
        residual_rms: f64,
        iterations: usize,
    },
    /// `predict` was called on a model that has not been fitted.
    #[error("model has not been fitted")]
    Unfitted,
    /// Input data contains NaN or infinite values.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    /// Tensor or layer shapes are incompatible.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
