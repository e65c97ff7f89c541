//! Synthetic graphene-like spectrum generation and augmentation transforms.
//!
//! Generated spectra are sums of pseudo-Voigt peaks over a constant baseline;
//! per-spectrum peak parameters are drawn uniformly from `mean +/- jitter`,
//! and the drawn values are recorded in the spectrum metadata so fits can be
//! checked against ground truth. The two augmentation transforms are the
//! additive uniform noise and rigid peak shift used for robustness studies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SpectraDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::peakfit::{VoigtParams, GAUSS_FWHM_FACTOR, TWO_D_WINDOW};
use crate::seed::{stream_rng, StreamRng};
use crate::spectrum::{interp_clamped, Spectrum};

/// Maximum rigid shift accepted by [`shift_peaks`] (cm^-1).
pub const MAX_SHIFT: f64 = 30.0;

/// One peak of a generator profile, parameterized by component FWHMs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakModel {
    pub center: f64,
    pub fwhm_lorentz: f64,
    pub fwhm_gauss: f64,
    pub amplitude: f64,
}

impl PeakModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_lorentz >= 0.0 && self.fwhm_gauss >= 0.0) {
            return Err(Error::Invariant("peak FWHMs must be >= 0".into()));
        }
        if self.fwhm_lorentz + self.fwhm_gauss <= 0.0 {
            return Err(Error::Invariant("peak FWHMs must not both be zero".into()));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::Invariant("peak amplitude must be positive".into()));
        }
        Ok(())
    }

    /// Converts to evaluable profile parameters (zero offset).
    pub fn to_voigt(self) -> VoigtParams {
        VoigtParams {
            center: self.center,
            sigma: self.fwhm_gauss / GAUSS_FWHM_FACTOR,
            gamma: self.fwhm_lorentz / 2.0,
            amplitude: self.amplitude,
            offset: 0.0,
        }
    }
}

/// Uniform jitter half-widths applied to each [`PeakModel`] field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakJitter {
    pub center: f64,
    pub fwhm_lorentz: f64,
    pub fwhm_gauss: f64,
    pub amplitude: f64,
}

impl PeakJitter {
    pub fn validate(&self) -> Result<()> {
        let ok = self.center >= 0.0
            && self.fwhm_lorentz >= 0.0
            && self.fwhm_gauss >= 0.0
            && self.amplitude >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invariant("jitter half-widths must be >= 0".into()))
        }
    }
}

/// A peak together with its per-spectrum jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub mean: PeakModel,
    #[serde(default)]
    pub jitter: PeakJitter,
}

/// Generator parameters for one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub name: String,
    pub peaks: Vec<PeakSpec>,
    #[serde(default)]
    pub baseline: f64,
    pub count: usize,
    /// Documented carrier-density interval (units 1e11 cm^-2); not used by
    /// the generator.
    #[serde(default)]
    pub charge_range: Option<(f64, f64)>,
}

impl ClassProfile {
    pub fn validate(&self) -> Result<()> {
        if self.peaks.is_empty() {
            return Err(Error::Invariant("profile needs at least one peak".into()));
        }
        if self.count < 1 {
            return Err(Error::Invariant("profile count must be >= 1".into()));
        }
        for p in &self.peaks {
            p.mean.validate()?;
            p.jitter.validate()?;
        }
        Ok(())
    }

    /// A fixed two-peak (G + 2D) profile with no jitter; handy for tests and
    /// as the sensitivity-study default.
    pub fn graphene_like(name: &str, count: usize) -> ClassProfile {
        ClassProfile {
            name: name.to_string(),
            peaks: alloc::vec![
                PeakSpec {
                    mean: PeakModel {
                        center: 1590.0,
                        fwhm_lorentz: 10.0,
                        fwhm_gauss: 3.0,
                        amplitude: 1.0,
                    },
                    jitter: PeakJitter::default(),
                },
                PeakSpec {
                    mean: PeakModel {
                        center: 2680.0,
                        fwhm_lorentz: 22.0,
                        fwhm_gauss: 6.0,
                        amplitude: 2.5,
                    },
                    jitter: PeakJitter::default(),
                },
            ],
            baseline: 0.05,
            count,
            charge_range: None,
        }
    }
}

/// How the noise level maps to the uniform perturbation.
///
/// `Range` reads the level as the peak-to-peak fluctuation range, i.e. draws
/// from `+/- level * I_ref / 2`; `Amplitude` reads it as the maximum
/// excursion, i.e. draws from `+/- level * I_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    #[default]
    Range,
    Amplitude,
}

/// Additive-noise specification. The level is relative to the maximum
/// intensity inside the reference window (by default the 2D band).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub reference: (f64, f64),
    #[serde(default)]
    pub convention: NoiseConvention,
}

impl NoiseSpec {
    pub fn new(level: f64) -> Result<NoiseSpec> {
        if !(0.0..=0.5).contains(&level) {
            return Err(Error::InvalidArgument("noise level must be in [0, 0.5]"));
        }
        Ok(NoiseSpec {
            level,
            reference: TWO_D_WINDOW,
            convention: NoiseConvention::Range,
        })
    }

    pub fn with_reference(mut self, lo: f64, hi: f64) -> NoiseSpec {
        self.reference = (lo, hi);
        self
    }

    pub fn with_convention(mut self, convention: NoiseConvention) -> NoiseSpec {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.level) {
            return Err(Error::InvalidArgument("noise level must be in [0, 0.5]"));
        }
        if !(self.reference.0 < self.reference.1) {
            return Err(Error::InvalidArgument("noise reference window is empty"));
        }
        Ok(())
    }
}

/// Draws a value from `mean +/- half`. Zero-jitter fields do not consume
/// randomness.
fn draw(rng: &mut StreamRng, mean: f64, half: f64) -> f64 {
    if half > 0.0 {
        rng.random_range(mean - half..=mean + half)
    } else {
        mean
    }
}

/// Generates one spectrum from a class profile on the given grid.
///
/// Peak parameters are drawn in declaration order (center, Lorentzian FWHM,
/// Gaussian FWHM, amplitude per peak); the drawn values are recorded in the
/// metadata under `peak<i>.<field>`, together with the class name, so they
/// can serve as fit ground truth.
pub fn synth_spectrum(profile: &ClassProfile, grid: &[f64], rng: &mut StreamRng) -> Spectrum {
    let mut drawn: Vec<PeakModel> = Vec::with_capacity(profile.peaks.len());
    for spec in &profile.peaks {
        drawn.push(PeakModel {
            center: draw(rng, spec.mean.center, spec.jitter.center),
            fwhm_lorentz: draw(rng, spec.mean.fwhm_lorentz, spec.jitter.fwhm_lorentz).max(0.0),
            fwhm_gauss: draw(rng, spec.mean.fwhm_gauss, spec.jitter.fwhm_gauss).max(0.0),
            amplitude: draw(rng, spec.mean.amplitude, spec.jitter.amplitude).max(1e-12),
        });
    }
    let voigts: Vec<VoigtParams> = drawn.iter().map(|p| p.to_voigt()).collect();
    let intensity: Vec<f64> = grid
        .iter()
        .map(|&x| profile.baseline + voigts.iter().map(|v| v.eval(x)).sum::<f64>())
        .collect();
    let mut s = Spectrum::new(grid.to_vec(), intensity)
        .expect("profile evaluation on a valid grid is finite");
    s.meta_mut().insert("class".into(), profile.name.clone());
    s.meta_mut()
        .insert("baseline".into(), format!("{}", profile.baseline));
    for (i, p) in drawn.iter().enumerate() {
        s.meta_mut().insert(format!("peak{i}.center"), format!("{}", p.center));
        s.meta_mut()
            .insert(format!("peak{i}.fwhm_lorentz"), format!("{}", p.fwhm_lorentz));
        s.meta_mut()
            .insert(format!("peak{i}.fwhm_gauss"), format!("{}", p.fwhm_gauss));
        s.meta_mut()
            .insert(format!("peak{i}.amplitude"), format!("{}", p.amplitude));
    }
    s
}

/// Generates a labeled dataset from one profile per class.
///
/// Row `r` of class `c` uses the rng stream derived from `(seed, [c, r])`,
/// so generation is reproducible and rows are independent of each other.
pub fn synth_dataset(
    profiles: &[ClassProfile],
    grid: &[f64],
    seed: u64,
) -> Result<SpectraDataset> {
    if profiles.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 class profiles"));
    }
    for (i, p) in profiles.iter().enumerate() {
        p.validate()?;
        if profiles[..i].iter().any(|q| q.name == p.name) {
            return Err(Error::DuplicateClass(p.name.clone()));
        }
    }
    let total: usize = profiles.iter().map(|p| p.count).sum();
    let mut rows = Matrix::zeros(total, grid.len());
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (c, profile) in profiles.iter().enumerate() {
        for r in 0..profile.count {
            let mut rng = stream_rng(seed, &[c as u64, r as u64]);
            let s = synth_spectrum(profile, grid, &mut rng);
            rows.row_mut(row).copy_from_slice(s.intensity());
            labels.push(c);
            row += 1;
        }
    }
    SpectraDataset::new(
        grid.to_vec(),
        rows,
        labels,
        profiles.iter().map(|p| p.name.clone()).collect(),
    )
}

/// Adds i.i.d. uniform noise scaled to the reference-window maximum.
///
/// With the default `Range` convention each bin moves by at most
/// `level * I_ref / 2`, so the peak-to-peak fluctuation range equals
/// `level * I_ref`.
pub fn add_noise(s: &Spectrum, n: &NoiseSpec, rng: &mut StreamRng) -> Result<Spectrum> {
    n.validate()?;
    let (lo, hi) = n.reference;
    let i_ref = s
        .axis()
        .iter()
        .zip(s.intensity())
        .filter(|(&x, _)| x >= lo && x <= hi)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if i_ref == f64::NEG_INFINITY {
        return Err(Error::EmptyOverlap {
            lo,
            hi,
            axis_lo: s.axis()[0],
            axis_hi: s.axis()[s.len() - 1],
        });
    }
    if n.level == 0.0 {
        return Ok(s.clone());
    }
    let half = match n.convention {
        NoiseConvention::Range => n.level * i_ref / 2.0,
        NoiseConvention::Amplitude => n.level * i_ref,
    };
    let noisy: Vec<f64> = s
        .intensity()
        .iter()
        .map(|v| v + rng.random_range(-half..=half))
        .collect();
    let mut out = Spectrum::new(s.axis().to_vec(), noisy)?;
    for (k, v) in s.meta() {
        out.meta_mut().insert(k.clone(), v.clone());
    }
    Ok(out)
}

/// Translates the intensity pattern by `delta` along the wavenumber axis,
/// re-sampling onto the unchanged grid by linear interpolation. Vacated edge
/// bins take the boundary value. `|delta|` must not exceed [`MAX_SHIFT`].
pub fn shift_peaks(s: &Spectrum, delta: f64) -> Result<Spectrum> {
    if !(delta.abs() <= MAX_SHIFT) {
        return Err(Error::InvalidArgument("shift must be within +/-30 cm^-1"));
    }
    if delta == 0.0 {
        return Ok(s.clone());
    }
    let shifted: Vec<f64> = s
        .axis()
        .iter()
        .map(|&x| interp_clamped(s.axis(), s.intensity(), x - delta))
        .collect();
    let mut out = Spectrum::new(s.axis().to_vec(), shifted)?;
    for (k, v) in s.meta() {
        out.meta_mut().insert(k.clone(), v.clone());
    }
    Ok(out)
}

/// Whether augmented rows replace the originals or are appended after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    #[default]
    Replace,
    Append,
}

/// Augments every row with an independent random shift and additive noise.
///
/// Row `i` derives its rng stream from `(seed, [i])` and draws the shift
/// before the noise. Labels are preserved; `Replace` keeps the row count,
/// `Append` emits originals first and augmented copies after.
pub fn augment_dataset(
    d: &SpectraDataset,
    noise: &NoiseSpec,
    shift_range: f64,
    mode: AugmentMode,
    seed: u64,
) -> Result<SpectraDataset> {
    if !(0.0..=MAX_SHIFT).contains(&shift_range) {
        return Err(Error::InvalidArgument("shift range must be in [0, 30]"));
    }
    noise.validate()?;
    let n = d.n_spectra();
    let mut augmented = Matrix::zeros(n, d.n_bins());
    for i in 0..n {
        let mut rng = stream_rng(seed, &[i as u64]);
        let delta = if shift_range > 0.0 {
            rng.random_range(-shift_range..=shift_range)
        } else {
            0.0
        };
        let s = d.spectrum(i);
        let shifted = shift_peaks(&s, delta)?;
        let noised = add_noise(&shifted, noise, &mut rng)?;
        augmented.row_mut(i).copy_from_slice(noised.intensity());
    }
    match mode {
        AugmentMode::Replace => d.with_rows(augmented),
        AugmentMode::Append => {
            let mut rows = Matrix::zeros(2 * n, d.n_bins());
            for i in 0..n {
                rows.row_mut(i).copy_from_slice(d.rows().row(i));
                rows.row_mut(n + i).copy_from_slice(augmented.row(i));
            }
            let mut labels = d.labels().to_vec();
            labels.extend_from_slice(d.labels());
            SpectraDataset::new(
                d.grid().to_vec(),
                rows,
                labels,
                d.class_names().to_vec(),
            )
        }
    }
}
