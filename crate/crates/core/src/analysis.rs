//! Fringe analysis: FFT spectrum, band-stop filtering and least-squares
//! sinusoid fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::CoincidenceTrace;

/// Fewest samples accepted by the spectral routines.
pub const MIN_POINTS: usize = 16;
/// Relative tolerance on the uniformity of the δ grid.
pub const GRID_TOL: f64 = 1e-6;
/// Default band-stop edges in units of 1/λ.
pub const DEFAULT_BAND: (f64, f64) = (0.65, 1.3);

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("delta grid is not uniform")]
    NonUniformGrid,
    #[error("invalid band [{0}, {1})")]
    InvalidBand(f64, f64),
    #[error("invalid period {0}")]
    InvalidPeriod(f64),
    #[error("period {period} nm has fewer than 4 samples at step {step} nm")]
    Undersampled { period: f64, step: f64 },
    #[error("fit amplitude is degenerate; period is unconstrained")]
    DegenerateAmplitude,
    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("normal equations are singular")]
    Singular,
    #[error("visibility needs a positive offset, got {0}")]
    NonPositiveOffset(f64),
    #[error("series lengths differ: {0} deltas, {1} values")]
    LengthMismatch(usize, usize),
}

/// A real series sampled on a δ grid (nm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub delta: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(delta: Vec<f64>, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if delta.len() != values.len() {
            return Err(AnalysisError::LengthMismatch(delta.len(), values.len()));
        }
        Ok(Self { delta, values })
    }

    pub fn coincidences(trace: &CoincidenceTrace) -> Self {
        Self {
            delta: trace.deltas(),
            values: trace.coincidences(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid spacing; fails on fewer than two points or a non-uniform grid.
    pub fn step(&self) -> Result<f64, AnalysisError> {
        if self.delta.len() < 2 {
            return Err(AnalysisError::TooFewPoints {
                got: self.delta.len(),
                needed: 2,
            });
        }
        let n = self.delta.len();
        let step = (self.delta[n - 1] - self.delta[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return Err(AnalysisError::NonUniformGrid);
        }
        for (i, d) in self.delta.iter().enumerate() {
            let expect = self.delta[0] + i as f64 * step;
            if (d - expect).abs() > GRID_TOL * step {
                return Err(AnalysisError::NonUniformGrid);
            }
        }
        Ok(step)
    }

    fn check_spectral(&self) -> Result<f64, AnalysisError> {
        if self.len() < MIN_POINTS {
            return Err(AnalysisError::TooFewPoints {
                got: self.len(),
                needed: MIN_POINTS,
            });
        }
        self.step()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// DFT of a mean-subtracted series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// nm
    pub step: f64,
    pub mean: f64,
    /// Full two-sided coefficients in FFT order.
    pub coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Signed wavenumber (1/nm) of coefficient `k`.
    pub fn wavenumber_of(&self, k: usize) -> f64 {
        let n = self.len() as f64;
        let k = k as f64;
        let signed = if k <= n / 2.0 { k } else { k - n };
        signed / (n * self.step)
    }

    /// Bin spacing in 1/nm.
    pub fn resolution(&self) -> f64 {
        1.0 / (self.len() as f64 * self.step)
    }

    /// Non-negative wavenumbers (1/nm), bins `0..=N/2`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..=self.len() / 2).map(|k| self.wavenumber_of(k)).collect()
    }

    /// One-sided amplitude spectrum: a sinusoid of amplitude A on a bin
    /// shows magnitude A.
    pub fn magnitudes(&self) -> Vec<f64> {
        let n = self.len();
        (0..=n / 2)
            .map(|k| {
                let m = self.coefficients[k].norm() / n as f64;
                if k == 0 || 2 * k == n {
                    m
                } else {
                    2.0 * m
                }
            })
            .collect()
    }

    /// `Σ|X_k|²/N`, equal to the power of the mean-subtracted series.
    pub fn power(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    /// Local maxima of the one-sided magnitudes (DC excluded) at or above
    /// `threshold × max`, strongest first.
    pub fn peaks(&self, threshold: f64) -> Vec<Peak> {
        let mags = self.magnitudes();
        let top = mags.iter().skip(1).cloned().fold(0.0, f64::max);
        if top <= 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for k in 1..mags.len() {
            let left = mags[k - 1];
            let right = mags.get(k + 1).copied().unwrap_or(0.0);
            if mags[k] >= threshold * top && mags[k] > left && mags[k] >= right {
                let offset = if k + 1 < mags.len() {
                    let denom = left - 2.0 * mags[k] + right;
                    if denom.abs() > 0.0 {
                        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                out.push(Peak {
                    bin: k,
                    wavenumber: (k as f64 + offset) * self.resolution(),
                    magnitude: mags[k],
                });
            }
        }
        out.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        out
    }

    /// One-sided magnitude at the bin nearest `wavenumber`.
    pub fn magnitude_at(&self, wavenumber: f64) -> f64 {
        let mags = self.magnitudes();
        let k = (wavenumber / self.resolution()).round() as usize;
        mags.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    /// 1/nm, parabolically refined
    pub wavenumber: f64,
    pub magnitude: f64,
}

fn fft(values: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(values.len())
    } else {
        planner.plan_fft_forward(values.len())
    };
    plan.process(values);
}

pub fn fft_spectrum(series: &Series, window: Window) -> Result<Spectrum, AnalysisError> {
    let step = series.check_spectral()?;
    let mean = series.mean();
    let n = series.len();
    let mut buf: Vec<Complex64> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = match window {
                Window::None => 1.0,
                Window::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos(),
            };
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    fft(&mut buf, false);
    Ok(Spectrum {
        step,
        mean,
        coefficients: buf,
    })
}

/// Zeroes every Fourier component with `|wavenumber|` in `[low, high)`
/// (1/nm) and transforms back. The mean is preserved.
pub fn band_stop(series: &Series, low: f64, high: f64) -> Result<Series, AnalysisError> {
    if !(low >= 0.0 && high > low) || !high.is_finite() {
        return Err(AnalysisError::InvalidBand(low, high));
    }
    let mut spec = fft_spectrum(series, Window::None)?;
    let n = spec.len();
    for k in 0..n {
        let f = spec.wavenumber_of(k).abs();
        if f >= low && f < high {
            spec.coefficients[k] = Complex64::new(0.0, 0.0);
        }
    }
    let mean = spec.mean;
    let mut buf = spec.coefficients;
    fft(&mut buf, true);
    let values = buf.iter().map(|c| c.re / n as f64 + mean).collect();
    Ok(Series {
        delta: series.delta.clone(),
        values,
    })
}

/// Band-stop edges in 1/nm for a band given in units of 1/λ.
pub fn band_in_wavenumbers(band_per_lambda: (f64, f64), wavelength: f64) -> (f64, f64) {
    (band_per_lambda.0 / wavelength, band_per_lambda.1 / wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// nm
    pub period: f64,
    pub period_uncertainty: f64,
    pub amplitude: f64,
    pub amplitude_uncertainty: f64,
    /// rad, phase of `cos(2πδ/period + phase)` at δ = 0
    pub phase: f64,
    pub phase_uncertainty: f64,
    pub offset: f64,
    pub offset_uncertainty: f64,
    pub visibility: f64,
    /// True when amplitude/offset fell outside [0, 1] or the offset was not
    /// positive.
    pub visibility_flagged: bool,
    pub residual_rms: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    pub clamped: bool,
}

pub fn visibility(fit: &FitResult) -> Result<Visibility, AnalysisError> {
    visibility_of(fit.amplitude, fit.offset)
}

fn visibility_of(amplitude: f64, offset: f64) -> Result<Visibility, AnalysisError> {
    if !(offset > 0.0) {
        return Err(AnalysisError::NonPositiveOffset(offset));
    }
    let raw = amplitude / offset;
    let value = raw.clamp(0.0, 1.0);
    Ok(Visibility {
        value,
        clamped: value != raw,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

struct Centered {
    u: Vec<f64>,
    center: f64,
}

fn centered(delta: &[f64]) -> Centered {
    let center = delta.iter().sum::<f64>() / delta.len() as f64;
    Centered {
        u: delta.iter().map(|d| d - center).collect(),
        center,
    }
}

/// Solves the linear least-squares problem for `columns` and returns the
/// coefficients, their covariance `s²(XᵀX)⁻¹` and the residual sum of
/// squares.
fn linear_lsq(
    columns: &[Vec<f64>],
    y: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>, f64), AnalysisError> {
    let n = y.len();
    let p = columns.len();
    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let inv = xtx.try_inverse().ok_or(AnalysisError::Singular)?;
    let coef = &inv * (x.transpose() * &yv);
    let resid = &yv - &x * &coef;
    let rss = resid.norm_squared();
    let dof = n.saturating_sub(p).max(1) as f64;
    Ok((coef, inv * (rss / dof), rss))
}

fn amplitude_and_phase(a: f64, b: f64, cov: [[f64; 2]; 2]) -> (f64, f64, f64, f64) {
    let amp = a.hypot(b);
    let theta = b.atan2(a);
    let (ga, gb) = if amp > 0.0 { (a / amp, b / amp) } else { (0.0, 0.0) };
    let var_amp = ga * ga * cov[0][0] + 2.0 * ga * gb * cov[0][1] + gb * gb * cov[1][1];
    let (ha, hb) = if amp > 0.0 {
        (-b / (amp * amp), a / (amp * amp))
    } else {
        (0.0, 0.0)
    };
    let var_theta = ha * ha * cov[0][0] + 2.0 * ha * hb * cov[0][1] + hb * hb * cov[1][1];
    (amp, var_amp.max(0.0).sqrt(), theta, var_theta.max(0.0).sqrt())
}

/// Least-squares fit of `offset + amplitude·cos(2πδ/period + phase)`.
///
/// The period is seeded from `initial_period` or, when absent, from the
/// dominant FFT peak.
pub fn fit_sinusoid(series: &Series, initial_period: Option<f64>) -> Result<FitResult, AnalysisError> {
    let step = series.step()?;
    let seed = match initial_period {
        Some(p) => p,
        None => {
            let spec = fft_spectrum(series, Window::None)?;
            let peak = spec
                .peaks(0.0)
                .first()
                .copied()
                .ok_or(AnalysisError::DegenerateAmplitude)?;
            1.0 / peak.wavenumber
        }
    };
    if !(seed > 0.0 && seed.is_finite()) {
        return Err(AnalysisError::InvalidPeriod(seed));
    }
    if seed < 4.0 * step {
        return Err(AnalysisError::Undersampled { period: seed, step });
    }
    let n = series.len();
    if n < 5 {
        return Err(AnalysisError::TooFewPoints { got: n, needed: 5 });
    }
    let Centered { u, center } = centered(&series.delta);
    let y = &series.values;
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    // linear start at the seeded frequency
    let omega0 = 2.0 * PI / seed;
    let cols = vec![
        vec![1.0; n],
        u.iter().map(|x| (omega0 * x).cos()).collect(),
        u.iter().map(|x| (omega0 * x).sin()).collect(),
    ];
    let (c0, _, _) = linear_lsq(&cols, y)?;
    let mut p = Vector4::new(c0[0], c0[1], c0[2], omega0);
    if c0[1].hypot(c0[2]) <= 1e-12 * scale {
        return Err(AnalysisError::DegenerateAmplitude);
    }

    let model = |p: &Vector4<f64>| -> (Vec<f64>, f64) {
        let r: Vec<f64> = u
            .iter()
            .zip(y)
            .map(|(x, yi)| yi - (p[0] + p[1] * (p[3] * x).cos() + p[2] * (p[3] * x).sin()))
            .collect();
        let rss = r.iter().map(|v| v * v).sum();
        (r, rss)
    };
    let normal = |p: &Vector4<f64>, r: &[f64]| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (x, ri) in u.iter().zip(r) {
            let (s, c) = (p[3] * x).sin_cos();
            let j = Vector4::new(1.0, c, s, x * (-p[1] * s + p[2] * c));
            jtj += j * j.transpose();
            jtr += j * *ri;
        }
        (jtj, jtr)
    };

    let (mut r, mut rss) = model(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&p, &r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let (tr, trss) = model(&trial);
            if trss <= rss {
                let rel = (rss - trss) / rss.max(f64::MIN_POSITIVE);
                let small_step = (0..4).all(|i| step[i].abs() <= 1e-12 * (trial[i].abs() + 1e-12));
                p = trial;
                r = tr;
                rss = trss;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step || rss <= 1e-28 * scale * scale * n as f64 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // no downhill step left: the optimum is reached to machine precision
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(AnalysisError::NonConvergence(iterations));
    }

    let (jtj, _) = normal(&p, &r);
    let inv = jtj.try_inverse().ok_or(AnalysisError::Singular)?;
    let dof = (n - 4) as f64;
    let cov = inv * (rss / dof);
    let (amp, amp_sd, theta, _) =
        amplitude_and_phase(p[1], p[2], [[cov[(1, 1)], cov[(1, 2)]], [cov[(2, 1)], cov[(2, 2)]]]);
    if amp <= 1e-12 * scale {
        return Err(AnalysisError::DegenerateAmplitude);
    }
    let omega = p[3];
    if !(omega > 0.0) {
        return Err(AnalysisError::InvalidPeriod(2.0 * PI / omega));
    }
    let period = 2.0 * PI / omega;
    let period_sd = 2.0 * PI * cov[(3, 3)].max(0.0).sqrt() / (omega * omega);
    // phase(δ=0) = −θ − ω·center
    let g = Vector4::new(0.0, p[2] / (amp * amp), -p[1] / (amp * amp), -center);
    let phase_sd = (g.transpose() * cov * g)[(0, 0)].max(0.0).sqrt();
    let phase = wrap_phase(-theta - omega * center);
    let (vis, flagged) = match visibility_of(amp, p[0]) {
        Ok(v) => (v.value, v.clamped),
        Err(_) => (0.0, true),
    };
    Ok(FitResult {
        period,
        period_uncertainty: period_sd,
        amplitude: amp,
        amplitude_uncertainty: amp_sd,
        phase,
        phase_uncertainty: phase_sd,
        offset: p[0],
        offset_uncertainty: cov[(0, 0)].max(0.0).sqrt(),
        visibility: vis,
        visibility_flagged: flagged,
        residual_rms: (rss / n as f64).sqrt(),
        iterations,
    })
}

/// Joint fit with periods fixed at λ and λ/2 and a shared offset.
/// Returns the (λ, λ/2) components.
pub fn fit_two_sinusoids(
    series: &Series,
    wavelength: f64,
) -> Result<(FitResult, FitResult), AnalysisError> {
    let step = series.step()?;
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(AnalysisError::InvalidPeriod(wavelength));
    }
    if wavelength / 2.0 < 4.0 * step {
        return Err(AnalysisError::Undersampled {
            period: wavelength / 2.0,
            step,
        });
    }
    let n = series.len();
    if n < 6 {
        return Err(AnalysisError::TooFewPoints { got: n, needed: 6 });
    }
    let Centered { u, center } = centered(&series.delta);
    let w1 = 2.0 * PI / wavelength;
    let w2 = 2.0 * w1;
    let cols = vec![
        vec![1.0; n],
        u.iter().map(|x| (w1 * x).cos()).collect(),
        u.iter().map(|x| (w1 * x).sin()).collect(),
        u.iter().map(|x| (w2 * x).cos()).collect(),
        u.iter().map(|x| (w2 * x).sin()).collect(),
    ];
    let (coef, cov, rss) = linear_lsq(&cols, &series.values)?;
    let offset = coef[0];
    let component = |i: usize, omega: f64| {
        let (amp, amp_sd, theta, theta_sd) = amplitude_and_phase(
            coef[i],
            coef[i + 1],
            [[cov[(i, i)], cov[(i, i + 1)]], [cov[(i + 1, i)], cov[(i + 1, i + 1)]]],
        );
        let (vis, flagged) = match visibility_of(amp, offset) {
            Ok(v) => (v.value, v.clamped),
            Err(_) => (0.0, true),
        };
        FitResult {
            period: 2.0 * PI / omega,
            period_uncertainty: 0.0,
            amplitude: amp,
            amplitude_uncertainty: amp_sd,
            phase: wrap_phase(-theta - omega * center),
            phase_uncertainty: theta_sd,
            offset,
            offset_uncertainty: cov[(0, 0)].max(0.0).sqrt(),
            visibility: vis,
            visibility_flagged: flagged,
            residual_rms: (rss / n as f64).sqrt(),
            iterations: 1,
        }
    };
    Ok((component(1, w1), component(3, w2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Band-stop edges in units of 1/λ; `None` disables filtering.
    pub band_per_lambda: Option<(f64, f64)>,
    pub window: Window,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            band_per_lambda: Some(DEFAULT_BAND),
            window: Window::None,
        }
    }
}

/// Output of the standard pipeline on a coincidence series.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub spectrum: Spectrum,
    pub filtered: Series,
    pub fit: Result<FitResult, AnalysisError>,
    pub components: Result<(FitResult, FitResult), AnalysisError>,
}

/// Spectrum → band-stop → sinusoid fit, plus the fixed-period two-component
/// fit on the raw series.
pub fn analyze(series: &Series, wavelength: f64, options: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    let spectrum = fft_spectrum(series, options.window)?;
    let filtered = match options.band_per_lambda {
        Some(band) => {
            let (lo, hi) = band_in_wavenumbers(band, wavelength);
            band_stop(series, lo, hi)?
        }
        None => series.clone(),
    };
    let fit = fit_sinusoid(&filtered, None);
    let components = fit_two_sinusoids(series, wavelength);
    Ok(Analysis {
        spectrum,
        filtered,
        fit,
        components,
    })
}
