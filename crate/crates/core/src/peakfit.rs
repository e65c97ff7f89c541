//! Pseudo-Voigt peak fitting and the Monte-Carlo noise-sensitivity study.
//!
//! The line shape is the pseudo-Voigt approximation: a linear mix of a
//! Lorentzian and a Gaussian of one common width, with the mixing fraction
//! and combined FWHM given by the Thompson-Cox-Hastings width-matching
//! formula. Fitting is damped least squares (Levenberg-Marquardt) with an
//! analytic Jacobian.

use alloc::vec::Vec;

// Float-math methods for no_std builds; shadowed by inherent methods on std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use crate::synth::{add_noise, synth_spectrum, ClassProfile, NoiseSpec};
use crate::{seed::stream_rng, spectrum};

use core::f64::consts::{LN_2, PI};

/// 2*sqrt(2 ln 2): converts a Gaussian sigma to its FWHM.
pub const GAUSS_FWHM_FACTOR: f64 = 2.354_820_045_030_949_3;

/// Default G-band fit window (cm^-1).
pub const G_WINDOW: (f64, f64) = (1500.0, 1700.0);
/// Default 2D-band fit window (cm^-1).
pub const TWO_D_WINDOW: (f64, f64) = (2550.0, 2850.0);

/// Parameters of one pseudo-Voigt peak.
///
/// `amplitude` is the peak height above `offset`; `sigma` is the Gaussian
/// width and `gamma` the Lorentzian half-width of the underlying components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoigtParams {
    pub center: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Derived peak quantities, all analytic functions of the fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub position: f64,
    pub fwhm: f64,
    pub intensity: f64,
    pub area: f64,
    pub residual_rms: f64,
}

/// A converged fit: parameters, derived report, and iteration count.
#[derive(Debug, Clone)]
pub struct PeakFit {
    pub params: VoigtParams,
    pub report: PeakReport,
    pub iterations: usize,
}

// Thompson-Cox-Hastings combined-width polynomial coefficients.
const TCH: [f64; 4] = [2.69269, 2.42843, 4.47163, 0.07842];
// Mixing-fraction polynomial in rho = fwhm_lorentz / fwhm.
const ETA: [f64; 3] = [1.36603, -0.47719, 0.11116];

impl VoigtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.gamma >= 0.0 && self.sigma + self.gamma > 0.0) {
            return Err(Error::Invariant(
                "voigt widths must be >= 0 and not both zero".into(),
            ));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::Invariant("voigt amplitude must be positive".into()));
        }
        let finite = self.center.is_finite()
            && self.sigma.is_finite()
            && self.gamma.is_finite()
            && self.amplitude.is_finite()
            && self.offset.is_finite();
        if !finite {
            return Err(Error::NonFinite("voigt parameters"));
        }
        Ok(())
    }

    /// Combined FWHM and Lorentzian mixing fraction.
    fn shape(&self) -> (f64, f64) {
        let fg = GAUSS_FWHM_FACTOR * self.sigma;
        let fl = 2.0 * self.gamma;
        let s = fg.powi(5)
            + TCH[0] * fg.powi(4) * fl
            + TCH[1] * fg.powi(3) * fl * fl
            + TCH[2] * fg * fg * fl.powi(3)
            + TCH[3] * fg * fl.powi(4)
            + fl.powi(5);
        let f = s.powf(0.2);
        let rho = fl / f;
        let eta = ETA[0] * rho + ETA[1] * rho * rho + ETA[2] * rho.powi(3);
        (f, eta)
    }

    /// Total full width at half maximum of the combined profile.
    pub fn fwhm(&self) -> f64 {
        self.shape().0
    }

    /// Analytic integral of the peak above the offset.
    pub fn area(&self) -> f64 {
        let (f, eta) = self.shape();
        self.amplitude * 0.5 * f * (eta * PI + (1.0 - eta) * (PI / LN_2).sqrt())
    }

    /// Profile value at wavenumber `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let (f, eta) = self.shape();
        let u = 2.0 * (x - self.center) / f;
        let lorentz = 1.0 / (1.0 + u * u);
        let gauss = (-LN_2 * u * u).exp();
        self.offset + self.amplitude * (eta * lorentz + (1.0 - eta) * gauss)
    }

    /// Value and gradient with respect to
    /// (center, sigma, gamma, amplitude, offset).
    fn eval_grad(&self, x: f64) -> (f64, [f64; 5]) {
        let fg = GAUSS_FWHM_FACTOR * self.sigma;
        let fl = 2.0 * self.gamma;
        let s = fg.powi(5)
            + TCH[0] * fg.powi(4) * fl
            + TCH[1] * fg.powi(3) * fl * fl
            + TCH[2] * fg * fg * fl.powi(3)
            + TCH[3] * fg * fl.powi(4)
            + fl.powi(5);
        let f = s.powf(0.2);
        let ds_dfg = 5.0 * fg.powi(4)
            + 4.0 * TCH[0] * fg.powi(3) * fl
            + 3.0 * TCH[1] * fg * fg * fl * fl
            + 2.0 * TCH[2] * fg * fl.powi(3)
            + TCH[3] * fl.powi(4);
        let ds_dfl = TCH[0] * fg.powi(4)
            + 2.0 * TCH[1] * fg.powi(3) * fl
            + 3.0 * TCH[2] * fg * fg * fl * fl
            + 4.0 * TCH[3] * fg * fl.powi(3)
            + 5.0 * fl.powi(4);
        let df_dfg = f / (5.0 * s) * ds_dfg;
        let df_dfl = f / (5.0 * s) * ds_dfl;

        let rho = fl / f;
        let eta = ETA[0] * rho + ETA[1] * rho * rho + ETA[2] * rho.powi(3);
        let deta_drho = ETA[0] + 2.0 * ETA[1] * rho + 3.0 * ETA[2] * rho * rho;
        let drho_dfg = -fl / (f * f) * df_dfg;
        let drho_dfl = 1.0 / f - fl / (f * f) * df_dfl;

        let u = 2.0 * (x - self.center) / f;
        let lorentz = 1.0 / (1.0 + u * u);
        let gauss = (-LN_2 * u * u).exp();
        let dl_du = -2.0 * u * lorentz * lorentz;
        let dg_du = -2.0 * LN_2 * u * gauss;
        let dp_du = eta * dl_du + (1.0 - eta) * dg_du;

        let profile = eta * lorentz + (1.0 - eta) * gauss;
        let a = self.amplitude;

        let dv_dcenter = a * dp_du * (-2.0 / f);
        let dv_df = a * dp_du * (-u / f);
        let dv_deta = a * (lorentz - gauss);
        let dv_dfg = dv_df * df_dfg + dv_deta * deta_drho * drho_dfg;
        let dv_dfl = dv_df * df_dfl + dv_deta * deta_drho * drho_dfl;

        (
            self.offset + a * profile,
            [
                dv_dcenter,
                dv_dfg * GAUSS_FWHM_FACTOR,
                dv_dfl * 2.0,
                profile,
                1.0,
            ],
        )
    }

    /// Heuristic starting point from window data: center at the argmax,
    /// amplitude from the data range, total width from the half-maximum span
    /// split equally between the two components.
    pub fn estimate(axis: &[f64], y: &[f64]) -> VoigtParams {
        let mut imax = 0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &v) in y.iter().enumerate() {
            if v > y[imax] {
                imax = i;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let half = 0.5 * (lo + hi);
        let mut left = axis[0];
        let mut right = axis[axis.len() - 1];
        for i in (0..imax).rev() {
            if y[i] < half {
                left = axis[i];
                break;
            }
        }
        for i in imax..y.len() {
            if y[i] < half {
                right = axis[i];
                break;
            }
        }
        let span = (right - left).max(axis[1] - axis[0]);
        let fwhm_each = 0.5 * span;
        VoigtParams {
            center: axis[imax],
            sigma: fwhm_each / GAUSS_FWHM_FACTOR,
            gamma: fwhm_each / 2.0,
            amplitude: (hi - lo).max(1e-12),
            offset: lo,
        }
    }

    fn report(&self, residual_rms: f64) -> PeakReport {
        PeakReport {
            position: self.center,
            fwhm: self.fwhm(),
            intensity: self.amplitude,
            area: self.area(),
            residual_rms,
        }
    }
}

/// Free-function form of [`VoigtParams::eval`].
pub fn voigt_eval(p: &VoigtParams, x: f64) -> f64 {
    p.eval(x)
}

const MAX_ITERATIONS: usize = 200;
const REL_TOL: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;

fn cost(params: &VoigtParams, axis: &[f64], y: &[f64]) -> f64 {
    if !(params.sigma >= 0.0 && params.gamma >= 0.0 && params.sigma + params.gamma > 1e-12) {
        return f64::INFINITY;
    }
    let mut c = 0.0;
    for (&x, &v) in axis.iter().zip(y) {
        let r = params.eval(x) - v;
        c += r * r;
    }
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

fn clamp_params(p: &mut VoigtParams, width: f64) {
    p.sigma = p.sigma.max(0.0).min(width);
    p.gamma = p.gamma.max(0.0).min(width);
    if p.sigma + p.gamma < 1e-9 {
        p.gamma = 1e-9;
    }
    p.amplitude = p.amplitude.max(1e-12);
}

/// Fits one pseudo-Voigt peak to the bins of `s` inside `[lo, hi]`.
///
/// Converges when the relative residual change drops below 1e-10; only
/// improving steps are ever accepted, so the final residual never exceeds
/// the residual at `init`. Non-convergence after 200 iterations returns
/// [`Error::NonConvergence`] carrying the best parameters seen.
pub fn fit_peak(s: &Spectrum, lo: f64, hi: f64, init: &VoigtParams) -> Result<PeakFit> {
    let windowed = spectrum::crop(s, lo, hi)?;
    let axis = windowed.axis();
    let y = windowed.intensity();
    if axis.len() < 8 {
        return Err(Error::InvalidArgument("fit window must contain >= 8 bins"));
    }
    if init.center < lo || init.center > hi {
        return Err(Error::InvalidArgument("initial center must lie in the window"));
    }
    let width = hi - lo;
    let n = axis.len();

    let mut params = *init;
    clamp_params(&mut params, width);
    let mut current = cost(&params, axis, y);
    if current >= f64::INFINITY {
        return Err(Error::InvalidArgument("initial parameters are not evaluable"));
    }
    // Residuals at the initial guess may already be at the noise floor.
    if current <= 1e-24 * n as f64 {
        let rms = (current / n as f64).sqrt();
        return Ok(PeakFit {
            params,
            report: params.report(rms),
            iterations: 0,
        });
    }

    let mut lambda = LAMBDA_INIT;
    for iteration in 1..=MAX_ITERATIONS {
        // Normal equations J^T J and J^T r at the current point.
        let mut jtj = [[0.0f64; 5]; 5];
        let mut jtr = [0.0f64; 5];
        for (&x, &v) in axis.iter().zip(y) {
            let (value, grad) = params.eval_grad(x);
            let r = value - v;
            for a in 0..5 {
                jtr[a] += grad[a] * r;
                for b in a..5 {
                    jtj[a][b] += grad[a] * grad[b];
                }
            }
        }
        for a in 0..5 {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let mut improved = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            if let Some(step) = solve5(&damped, &jtr) {
                let mut trial = params;
                trial.center -= step[0];
                trial.sigma -= step[1];
                trial.gamma -= step[2];
                trial.amplitude -= step[3];
                trial.offset -= step[4];
                clamp_params(&mut trial, width);
                let trial_cost = cost(&trial, axis, y);
                if trial_cost < current {
                    let rel = (current - trial_cost) / current.max(f64::MIN_POSITIVE);
                    params = trial;
                    current = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < REL_TOL || current <= 1e-24 * n as f64 {
                        let rms = (current / n as f64).sqrt();
                        return Ok(PeakFit {
                            params,
                            report: params.report(rms),
                            iterations: iteration,
                        });
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction at any damping: a (local) minimum.
            let rms = (current / n as f64).sqrt();
            return Ok(PeakFit {
                params,
                report: params.report(rms),
                iterations: iteration,
            });
        }
    }

    let rms = (current / n as f64).sqrt();
    Err(Error::NonConvergence {
        best: params,
        residual_rms: rms,
        iterations: MAX_ITERATIONS,
    })
}

/// [`fit_peak`] with the starting point estimated from the window data.
pub fn fit_peak_auto(s: &Spectrum, lo: f64, hi: f64) -> Result<PeakFit> {
    let windowed = spectrum::crop(s, lo, hi)?;
    let init = VoigtParams::estimate(windowed.axis(), windowed.intensity());
    fit_peak(s, lo, hi, &init)
}

/// Gaussian elimination with partial pivoting for the 5x5 normal equations.
fn solve5(a: &[[f64; 5]; 5], b: &[f64; 5]) -> Option<[f64; 5]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..5 {
        let mut pivot = col;
        for row in col + 1..5 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0f64; 5];
    for col in (0..5).rev() {
        let mut acc = rhs[col];
        for k in col + 1..5 {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// The eight parameters tracked by the sensitivity study, in output order.
pub const STUDY_PARAM_NAMES: [&str; 8] = [
    "g_position",
    "g_fwhm",
    "g_intensity",
    "g_area",
    "two_d_position",
    "two_d_fwhm",
    "two_d_intensity",
    "two_d_area",
];

/// Mean/std of one extracted parameter at one noise level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamStats {
    pub mean: f64,
    pub std: f64,
    pub n_failures: usize,
}

/// One row (noise level) of the sensitivity study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub noise_level: f64,
    /// Indexed like [`STUDY_PARAM_NAMES`].
    pub stats: [ParamStats; 8],
}

/// Monte-Carlo sensitivity of extracted peak parameters to additive noise.
///
/// One clean spectrum is drawn from `profile`; at each level, `reps` noisy
/// copies are fitted in the G and 2D windows and the per-parameter mean and
/// standard deviation over the successful fits are reported. Failed fits
/// leave NaN cells behind and are counted per band.
pub fn noise_sensitivity_study(
    profile: &ClassProfile,
    levels: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SensitivityRow>> {
    if reps < 2 {
        return Err(Error::InvalidArgument("study needs at least 2 repetitions"));
    }
    let grid = spectrum::standard_grid();
    let mut rng = stream_rng(seed, &[0]);
    let base = synth_spectrum(profile, &grid, &mut rng);

    let mut rows = Vec::with_capacity(levels.len());
    for (li, &level) in levels.iter().enumerate() {
        let spec = NoiseSpec::new(level)?;
        // samples[param][rep], NaN marking a failed fit.
        let mut samples = alloc::vec![alloc::vec![f64::NAN; reps]; 8];
        let mut failures = [0usize; 2];
        for rep in 0..reps {
            let mut rep_rng = stream_rng(seed, &[1, li as u64, rep as u64]);
            let noisy = add_noise(&base, &spec, &mut rep_rng)?;
            for (band, window) in [G_WINDOW, TWO_D_WINDOW].iter().enumerate() {
                match fit_peak_auto(&noisy, window.0, window.1) {
                    Ok(fit) => {
                        let r = fit.report;
                        samples[band * 4][rep] = r.position;
                        samples[band * 4 + 1][rep] = r.fwhm;
                        samples[band * 4 + 2][rep] = r.intensity;
                        samples[band * 4 + 3][rep] = r.area;
                    }
                    Err(_) => failures[band] += 1,
                }
            }
        }
        let stats = core::array::from_fn(|p| {
            let good: Vec<f64> = samples[p].iter().copied().filter(|v| v.is_finite()).collect();
            let (mean, std) = mean_std(&good);
            ParamStats {
                mean,
                std,
                n_failures: failures[p / 4],
            }
        });
        rows.push(SensitivityRow {
            noise_level: level,
            stats,
        });
    }
    Ok(rows)
}

/// Sample mean and standard deviation (n-1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::uniform_grid;
    use alloc::vec;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn sample(p: &VoigtParams, lo: f64, hi: f64, n: usize) -> Spectrum {
        let axis = uniform_grid(lo, hi, n);
        let y: Vec<f64> = axis.iter().map(|&x| p.eval(x)).collect();
        Spectrum::new(axis, y).unwrap()
    }

    /// sigma -> 0 reduces to the closed-form Lorentzian.
    #[test]
    fn lorentzian_limit() {
        let p = VoigtParams {
            center: 1590.0,
            sigma: 0.0,
            gamma: 7.0,
            amplitude: 2.0,
            offset: 0.3,
        };
        for i in 0..200 {
            let x = 1500.0 + i as f64;
            let d = x - p.center;
            let reference = p.offset + p.amplitude * p.gamma * p.gamma / (d * d + p.gamma * p.gamma);
            assert!((p.eval(x) - reference).abs() < 1e-6, "x = {x}");
        }
    }

    /// gamma -> 0 reduces to the closed-form Gaussian.
    #[test]
    fn gaussian_limit() {
        let p = VoigtParams {
            center: 2680.0,
            sigma: 11.0,
            gamma: 0.0,
            amplitude: 1.5,
            offset: 0.1,
        };
        for i in 0..200 {
            let x = 2600.0 + i as f64;
            let d = x - p.center;
            let reference =
                p.offset + p.amplitude * (-d * d / (2.0 * p.sigma * p.sigma)).exp();
            assert!((p.eval(x) - reference).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn profile_peaks_at_center() {
        let p = VoigtParams {
            center: 2000.0,
            sigma: 4.0,
            gamma: 6.0,
            amplitude: 1.0,
            offset: 0.0,
        };
        let top = p.eval(p.center);
        for i in 1..500 {
            let delta = i as f64 * 0.37;
            assert!(top >= p.eval(p.center + delta));
            assert!(top >= p.eval(p.center - delta));
        }
        // Symmetry about the center.
        assert_relative_eq!(p.eval(p.center + 12.3), p.eval(p.center - 12.3), epsilon = 1e-12);
    }

    #[test]
    fn fwhm_is_consistent_with_eval() {
        let p = VoigtParams {
            center: 2000.0,
            sigma: 5.0,
            gamma: 3.0,
            amplitude: 2.0,
            offset: 0.5,
        };
        let f = p.fwhm();
        let half = p.offset + 0.5 * p.amplitude;
        // The profile passes half maximum at center +/- fwhm/2 (the TCH
        // width combination is accurate to ~1e-4 relative).
        assert_relative_eq!(p.eval(p.center + 0.5 * f), half, max_relative = 2e-3);
        assert_relative_eq!(p.eval(p.center - 0.5 * f), half, max_relative = 2e-3);
    }

    /// Analytic gradient vs central finite differences.
    #[test]
    fn jacobian_matches_finite_differences() {
        let p = VoigtParams {
            center: 1600.0,
            sigma: 3.5,
            gamma: 5.0,
            amplitude: 1.7,
            offset: 0.2,
        };
        let h = 1e-6;
        for i in 0..40 {
            let x = 1560.0 + 2.0 * i as f64;
            let (_, grad) = p.eval_grad(x);
            let fields: [fn(&mut VoigtParams) -> &mut f64; 5] = [
                |q| &mut q.center,
                |q| &mut q.sigma,
                |q| &mut q.gamma,
                |q| &mut q.amplitude,
                |q| &mut q.offset,
            ];
            for (k, field) in fields.iter().enumerate() {
                let mut hi = p;
                *field(&mut hi) += h;
                let mut lo = p;
                *field(&mut lo) -= h;
                let numeric = (hi.eval(x) - lo.eval(x)) / (2.0 * h);
                let denom = grad[k].abs().max(numeric.abs()).max(1e-3);
                assert!(
                    (grad[k] - numeric).abs() / denom < 1e-6,
                    "param {k} at x={x}: {} vs {}",
                    grad[k],
                    numeric
                );
            }
        }
    }

    /// Generator-as-oracle: fitting noiseless synthetic data recovers the
    /// true parameters well inside the spec tolerances.
    #[test]
    fn noiseless_fit_recovers_truth() {
        let truth = VoigtParams {
            center: 1589.3,
            sigma: 2.1,
            gamma: 5.6,
            amplitude: 1.4,
            offset: 0.12,
        };
        let s = sample(&truth, 1500.0, 1700.0, 86);
        let fit = fit_peak_auto(&s, 1500.0, 1700.0).unwrap();
        assert!((fit.params.center - truth.center).abs() < 0.05);
        assert!((fit.report.fwhm - truth.fwhm()).abs() / truth.fwhm() < 0.01);
        assert!((fit.report.intensity - truth.amplitude).abs() / truth.amplitude < 0.01);
        assert!((fit.report.area - truth.area()).abs() / truth.area() < 0.01);
    }

    /// Starting at the true parameters converges immediately.
    #[test]
    fn exact_init_is_a_fixed_point() {
        let truth = VoigtParams {
            center: 2681.0,
            sigma: 4.0,
            gamma: 9.0,
            amplitude: 3.0,
            offset: 0.05,
        };
        let s = sample(&truth, 2550.0, 2850.0, 129);
        let fit = fit_peak(&s, 2550.0, 2850.0, &truth).unwrap();
        assert!(fit.iterations <= 2, "took {} iterations", fit.iterations);
        assert!(fit.report.residual_rms < 1e-9);
    }

    /// Accepted steps are monotone: the final residual never exceeds the
    /// residual at the initial guess.
    #[test]
    fn fit_never_worsens_the_initial_residual() {
        let truth = VoigtParams {
            center: 1600.0,
            sigma: 3.0,
            gamma: 6.0,
            amplitude: 1.0,
            offset: 0.0,
        };
        let mut s = sample(&truth, 1500.0, 1700.0, 86);
        // Perturb with deterministic pseudo-noise.
        let mut rng = stream_rng(99, &[7]);
        let noisy: Vec<f64> = s
            .intensity()
            .iter()
            .map(|v| v + 0.05 * (rng.random::<f64>() - 0.5))
            .collect();
        s = Spectrum::new(s.axis().to_vec(), noisy).unwrap();

        let init = VoigtParams {
            center: 1620.0,
            sigma: 8.0,
            gamma: 2.0,
            amplitude: 0.4,
            offset: 0.2,
        };
        let window = crate::spectrum::crop(&s, 1500.0, 1700.0).unwrap();
        let initial_cost = cost(&init, window.axis(), window.intensity());
        let fit = fit_peak(&s, 1500.0, 1700.0, &init).unwrap();
        let n = window.len() as f64;
        assert!(fit.report.residual_rms * fit.report.residual_rms * n <= initial_cost + 1e-12);
    }

    /// A pure-noise window either fails or leaves essentially all the input
    /// variance in the residual.
    #[test]
    fn pure_noise_window_is_flagged() {
        let axis = uniform_grid(1500.0, 1700.0, 86);
        let mut rng = stream_rng(4242, &[]);
        let y: Vec<f64> = (0..86).map(|_| rng.random::<f64>()).collect();
        let (_, input_std) = mean_std(&y);
        let s = Spectrum::new(axis, y).unwrap();
        match fit_peak_auto(&s, 1500.0, 1700.0) {
            Err(Error::NonConvergence { .. }) => {}
            Ok(fit) => assert!(
                fit.report.residual_rms >= 0.9 * input_std,
                "rms {} vs input std {}",
                fit.report.residual_rms,
                input_std
            ),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn window_preconditions_are_checked() {
        let truth = VoigtParams {
            center: 1600.0,
            sigma: 3.0,
            gamma: 6.0,
            amplitude: 1.0,
            offset: 0.0,
        };
        let s = sample(&truth, 1500.0, 1700.0, 86);
        assert!(fit_peak_auto(&s, 1600.0, 1608.0).is_err()); // < 8 bins
        let bad_init = VoigtParams {
            center: 900.0,
            ..truth
        };
        assert!(fit_peak(&s, 1500.0, 1700.0, &bad_init).is_err());
    }

    fn study_profile() -> ClassProfile {
        ClassProfile::graphene_like("study", 1)
    }

    #[test]
    fn study_at_zero_noise_is_deterministic() {
        let rows = noise_sensitivity_study(&study_profile(), &[0.0], 5, 3).unwrap();
        for stat in &rows[0].stats {
            assert!(stat.std < 1e-6, "std {}", stat.std);
            assert_eq!(stat.n_failures, 0);
        }
    }

    #[test]
    fn study_scatter_grows_with_noise() {
        let rows = noise_sensitivity_study(&study_profile(), &[0.01, 0.10], 30, 5).unwrap();
        let g_pos_low = rows[0].stats[0].std;
        let g_pos_high = rows[1].stats[0].std;
        assert!(
            g_pos_high > g_pos_low,
            "G position std {g_pos_high} at 10% should exceed {g_pos_low} at 1%"
        );
    }

    #[test]
    fn study_table_shape() {
        let rows =
            noise_sensitivity_study(&study_profile(), &[0.01, 0.05, 0.10, 0.20], 4, 1).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert_eq!(row.stats.len(), STUDY_PARAM_NAMES.len());
        }
        assert!(noise_sensitivity_study(&study_profile(), &[0.01], 1, 1).is_err());
    }

    #[test]
    fn area_closed_forms() {
        // Pure Lorentzian: area = amplitude * pi * gamma.
        let l = VoigtParams {
            center: 0.0,
            sigma: 0.0,
            gamma: 3.0,
            amplitude: 2.0,
            offset: 0.0,
        };
        assert_relative_eq!(l.area(), 2.0 * PI * 3.0, epsilon = 1e-9);
        // Pure Gaussian: area = amplitude * sigma * sqrt(2 pi).
        let g = VoigtParams {
            center: 0.0,
            sigma: 3.0,
            gamma: 0.0,
            amplitude: 2.0,
            offset: 0.0,
        };
        assert_relative_eq!(g.area(), 2.0 * 3.0 * (2.0 * PI).sqrt(), epsilon = 1e-9);
    }
}
