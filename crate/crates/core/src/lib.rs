//! Core algorithms for 1D spectral classification.
//!
//! This crate implements the full numeric stack of the toolkit, with no IO:
//!
//! - [`spectrum`]: the [`Spectrum`](spectrum::Spectrum) type and preprocessing
//!   (crop, resample, rescale, cosmic-ray removal),
//! - [`dataset`]: labeled spectra collections and stratified splitting,
//! - [`eval`]: accuracy and confusion-matrix reports,
//! - [`synth`]: synthetic graphene-like spectrum generation plus the two
//!   augmentation transforms (additive noise, peak shifting),
//! - [`peakfit`]: pseudo-Voigt peak fitting via Levenberg-Marquardt and the
//!   Monte-Carlo noise-sensitivity study,
//! - [`ml`]: KNN, decision tree, random forest, Gaussian naive Bayes, SVM
//!   (SMO) and PCA, all built from their defining algorithms,
//! - [`nn`]: a minimal fp64 tensor/backprop engine and the four reference
//!   1D architectures (FC, CNN, FullCNN, MHCNN) with Adam training.
//!
//! Everything is deterministic given explicit seeds; all types are immutable
//! after construction and all operations are pure functions, so values can be
//! shared freely across worker threads. The crate is `no_std`-compatible
//! (`alloc` required): disable the default `std` feature for embedded use.
//! File formats, the experiment harness, and the CLI live in the companion
//! `specbench` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod ml;
pub mod nn;
pub mod peakfit;
pub mod seed;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use spectrum::Spectrum;
