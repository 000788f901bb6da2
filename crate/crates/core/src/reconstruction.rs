//! Analysis side of the Cryoscope workflow: phase extraction and unwrapping,
//! differentiation to instantaneous detuning, inversion of the flux-frequency
//! relation to a mean-normalized flux response, and recovery of transmon
//! parameters from 2D spectroscopy maps.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::transmon::{
    flux_to_frequency, frequency_to_flux, max_frequency, CryoscopeTrace, SpectroscopyMap,
    TransmonParams,
};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Points whose Bloch-vector length falls below this are flagged low-contrast.
pub const DEFAULT_QUALITY_FLOOR: f64 = 0.05;

/// Minimum flux span (in flux quanta, via the initial-guess map) for an
/// identifiable spectroscopy fit.
const MIN_FLUX_SPAN: f64 = 0.1;

const LM_MAX_ITERATIONS: usize = 200;
const LM_REL_STEP_TOL: f64 = 1e-10;
const LM_REL_COST_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Phase series
// ---------------------------------------------------------------------------

/// Unwrapped accumulated phase per pulse duration, with a per-point quality
/// (Bloch-vector length) and the indices that fell below the quality floor.
#[derive(Debug, Clone)]
pub struct PhaseSeries {
    durations_s: Vec<f64>,
    phase_rad: Vec<f64>,
    quality: Vec<f64>,
    low_contrast: Vec<usize>,
}

impl PhaseSeries {
    pub fn new(durations_s: Vec<f64>, phase_rad: Vec<f64>, quality: Vec<f64>) -> Result<Self> {
        if durations_s.len() != phase_rad.len() || durations_s.len() != quality.len() {
            return Err(Error::InvalidArgument("phase series columns disagree".into()));
        }
        if durations_s.is_empty() {
            return Err(Error::InvalidArgument("phase series must be non-empty".into()));
        }
        if phase_rad.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("phases must be finite".into()));
        }
        Ok(Self {
            durations_s,
            phase_rad,
            quality,
            low_contrast: Vec::new(),
        })
    }

    pub fn durations_s(&self) -> &[f64] {
        &self.durations_s
    }

    pub fn phase_rad(&self) -> &[f64] {
        &self.phase_rad
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    /// Indices whose quality fell below the extraction floor.
    pub fn low_contrast(&self) -> &[usize] {
        &self.low_contrast
    }

    pub fn len(&self) -> usize {
        self.durations_s.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Unwrap wrapped phases: successive differences larger than pi in magnitude
/// are shifted by whole turns; a difference of exactly pi is left alone. The
/// first element is unchanged.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    if wrapped.is_empty() {
        return out;
    }
    out.push(wrapped[0]);
    // Integer turn counter keeps each output a single `w + 2*pi*k` rounding.
    let mut turns: f64 = 0.0;
    for i in 1..wrapped.len() {
        let d = wrapped[i] - wrapped[i - 1];
        if d.abs() > std::f64::consts::PI {
            turns -= (d / TAU).round();
        }
        out.push(wrapped[i] + TAU * turns);
    }
    out
}

/// Extract the accumulated phase from a Cryoscope trace with the default
/// quality floor.
pub fn extract_phase(trace: &CryoscopeTrace) -> PhaseSeries {
    extract_phase_with_floor(trace, DEFAULT_QUALITY_FLOOR)
}

/// Extract the accumulated phase: `atan2(2 p_y - 1, 2 p_x - 1)` per point,
/// then unwrapped. Points with Bloch-vector length below `quality_floor` are
/// recorded as low-contrast warnings, not errors.
pub fn extract_phase_with_floor(trace: &CryoscopeTrace, quality_floor: f64) -> PhaseSeries {
    let mut wrapped = Vec::with_capacity(trace.len());
    let mut quality = Vec::with_capacity(trace.len());
    let mut low_contrast = Vec::new();
    for i in 0..trace.len() {
        let x = 2.0 * trace.p_x()[i] - 1.0;
        let y = 2.0 * trace.p_y()[i] - 1.0;
        wrapped.push(y.atan2(x));
        let q = (x * x + y * y).sqrt();
        if q < quality_floor {
            low_contrast.push(i);
        }
        quality.push(q);
    }
    PhaseSeries {
        durations_s: trace.durations_s().to_vec(),
        phase_rad: unwrap_phase(&wrapped),
        quality,
        low_contrast,
    }
}

/// Differentiate the unwrapped phase to instantaneous detuning in Hz:
/// central differences inside, one-sided at the ends, all divided by 2 pi.
/// The output sample rate is `1 / delta_tau`.
pub fn phase_to_detuning(series: &PhaseSeries) -> Result<Signal> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least two phase points to differentiate".into(),
        ));
    }
    let dt = series.durations_s[1] - series.durations_s[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("durations must be increasing".into()));
    }
    for i in 2..n {
        let step = series.durations_s[i] - series.durations_s[i - 1];
        if (step - dt).abs() > 1e-12 * dt {
            return Err(Error::InvalidArgument(format!(
                "non-uniform duration spacing at index {i}: {step} vs {dt}"
            )));
        }
    }
    let phi = &series.phase_rad;
    let mut detuning = vec![0.0; n];
    detuning[0] = (phi[1] - phi[0]) / (dt * TAU);
    detuning[n - 1] = (phi[n - 1] - phi[n - 2]) / (dt * TAU);
    for i in 1..n - 1 {
        detuning[i] = (phi[i + 1] - phi[i - 1]) / (2.0 * dt * TAU);
    }
    Signal::new(detuning, 1.0 / dt)
}

// ---------------------------------------------------------------------------
// Flux response
// ---------------------------------------------------------------------------

/// Reconstructed flux trajectory: absolute flux per time step and the same
/// trace normalized by its mean over the analysis window.
#[derive(Debug, Clone)]
pub struct FluxResponse {
    times_s: Vec<f64>,
    raw_flux_phi0: Vec<f64>,
    normalized: Vec<f64>,
}

impl FluxResponse {
    /// Assemble a response from explicit columns (used for predicted or
    /// externally loaded curves). Columns must agree in length and be finite.
    pub fn from_columns(
        times_s: Vec<f64>,
        raw_flux_phi0: Vec<f64>,
        normalized: Vec<f64>,
    ) -> Result<Self> {
        if times_s.len() != raw_flux_phi0.len() || times_s.len() != normalized.len() {
            return Err(Error::InvalidArgument("flux response columns disagree".into()));
        }
        if raw_flux_phi0
            .iter()
            .chain(normalized.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("flux response values must be finite".into()));
        }
        Ok(Self {
            times_s,
            raw_flux_phi0,
            normalized,
        })
    }

    pub fn times_s(&self) -> &[f64] {
        &self.times_s
    }

    pub fn raw_flux_phi0(&self) -> &[f64] {
        &self.raw_flux_phi0
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Normalized response as a signal on the detuning time grid.
    pub fn normalized_signal(&self, sample_rate_hz: f64) -> Result<Signal> {
        Signal::new(self.normalized.clone(), sample_rate_hz)
    }
}

/// Invert the flux-frequency relation sample by sample:
/// `raw[n] = frequency_to_flux(f_q(baseline) + detuning[n])`, then normalize
/// by the mean of `raw` over `analysis_window`.
pub fn detuning_to_flux_response(
    detuning: &Signal,
    params: &TransmonParams,
    baseline_flux: f64,
    analysis_window: Range<usize>,
) -> Result<FluxResponse> {
    params.validate()?;
    if analysis_window.start >= analysis_window.end || analysis_window.end > detuning.len() {
        return Err(Error::InvalidArgument(format!(
            "analysis window {}..{} out of bounds for length {}",
            analysis_window.start,
            analysis_window.end,
            detuning.len()
        )));
    }
    let f_base = flux_to_frequency(params, baseline_flux);
    let f_max = max_frequency(params);
    let mut raw = Vec::with_capacity(detuning.len());
    let mut times = Vec::with_capacity(detuning.len());
    for (n, d) in detuning.samples().iter().enumerate() {
        let f = f_base + d;
        let band_dust = 1e-12 * f_max.abs();
        if f < -params.ec_hz - band_dust || f > f_max + band_dust {
            return Err(Error::OutOfBand {
                index: n,
                frequency_hz: f,
                min_hz: -params.ec_hz,
                max_hz: f_max,
            });
        }
        raw.push(frequency_to_flux(params, f.min(f_max))?);
        times.push(detuning.time_at(n));
    }
    let mean: f64 =
        raw[analysis_window.clone()].iter().sum::<f64>() / analysis_window.len() as f64;
    if mean.abs() < 1e-300 {
        return Err(Error::InvalidArgument(
            "mean flux over the analysis window is zero; cannot normalize".into(),
        ));
    }
    let normalized = raw.iter().map(|r| r / mean).collect();
    Ok(FluxResponse {
        times_s: times,
        raw_flux_phi0: raw,
        normalized,
    })
}

// ---------------------------------------------------------------------------
// Spectroscopy peak extraction
// ---------------------------------------------------------------------------

/// Extracted resonances plus the voltage rows skipped for lacking a clear dip.
#[derive(Debug, Clone)]
pub struct PeakExtraction {
    /// `(voltage, resonance frequency)` per usable voltage row.
    pub points: Vec<(f64, f64)>,
    /// Indices of voltage rows without a dip above 3x the noise floor.
    pub skipped_columns: Vec<usize>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per voltage row, locate the transmission minimum and refine it with a
/// three-point parabolic interpolation of the reciprocal dip depth (exact for
/// a Lorentzian line). Rows whose dip does not exceed three times the
/// MAD-based noise floor are skipped and reported.
pub fn extract_peaks(map: &SpectroscopyMap) -> PeakExtraction {
    let probes = map.probe_frequencies_hz();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (i, row) in map.response().iter().enumerate() {
        let (j, _) = row
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("rows validated non-empty");
        let mut work = row.clone();
        let med = median(&mut work);
        let mut deviations: Vec<f64> = row.iter().map(|v| (v - med).abs()).collect();
        let noise_floor = 1.4826 * median(&mut deviations);
        let dip = med - row[j];
        if dip <= 3.0 * noise_floor + 1e-12 {
            skipped.push(i);
            continue;
        }
        let mut frequency = probes[j];
        if j > 0 && j + 1 < row.len() && probes.len() >= 2 {
            let df = probes[j + 1] - probes[j];
            let depths = [med - row[j - 1], med - row[j], med - row[j + 1]];
            let offset = if depths.iter().all(|d| *d > 0.0) {
                // Reciprocal depth of a Lorentzian is quadratic in frequency.
                let u: Vec<f64> = depths.iter().map(|d| 1.0 / d).collect();
                let denom = u[0] - 2.0 * u[1] + u[2];
                if denom > 0.0 {
                    (0.5 * (u[0] - u[2]) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else {
                let denom = row[j - 1] - 2.0 * row[j] + row[j + 1];
                if denom != 0.0 {
                    (0.5 * (row[j - 1] - row[j + 1]) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            };
            frequency += offset * df;
        }
        points.push((map.voltages_v()[i], frequency));
    }
    PeakExtraction {
        points,
        skipped_columns: skipped,
    }
}

// ---------------------------------------------------------------------------
// Spectroscopy fit
// ---------------------------------------------------------------------------

/// Converged spectroscopy fit result.
#[derive(Debug, Clone)]
pub struct SpectroscopyFit {
    pub params: TransmonParams,
    pub rms_residual_hz: f64,
    pub iterations: usize,
    /// RMS residual after each accepted step (non-increasing).
    pub residual_history: Vec<f64>,
}

/// Model frequencies and Jacobian at `theta = [ln ec, ln ej, pv, po]`.
fn model_and_jacobian(theta: &Vector4<f64>, voltages: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (ec, ej, pv, po) = (theta[0].exp(), theta[1].exp(), theta[2], theta[3]);
    let n = voltages.len();
    let mut model = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, 4);
    for (k, &v) in voltages.iter().enumerate() {
        let phi = pv * v + po;
        let c = (std::f64::consts::PI * phi).cos();
        let ac = c.abs();
        let fec = (8.0 * ec * ej * ac).sqrt();
        model[k] = fec - ec;
        let dfdphi = -fec * std::f64::consts::PI * c.signum()
            * (std::f64::consts::PI * phi).sin()
            / (2.0 * ac.max(1e-12));
        jac[(k, 0)] = 0.5 * fec - ec;
        jac[(k, 1)] = 0.5 * fec;
        jac[(k, 2)] = dfdphi * v;
        jac[(k, 3)] = dfdphi;
    }
    (model, jac)
}

/// Fit the flux-frequency relation to `(voltage, frequency)` points by damped
/// nonlinear least squares in `[ln ec, ln ej, flux_per_volt, flux_offset]`.
///
/// Converges when the relative step falls below 1e-10 or the relative
/// residual change below 1e-12, within 200 iterations; otherwise returns a
/// divergence error carrying the best parameters found.
pub fn fit_spectroscopy(
    points: &[(f64, f64)],
    initial_guess: &TransmonParams,
) -> Result<SpectroscopyFit> {
    if points.len() < 4 {
        return Err(Error::Identifiability(format!(
            "need at least 4 points for 4 parameters, got {}",
            points.len()
        )));
    }
    initial_guess.validate()?;
    let vmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let vmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = initial_guess.flux_per_volt.abs() * (vmax - vmin);
    if span < MIN_FLUX_SPAN {
        return Err(Error::Identifiability(format!(
            "voltage sweep spans only {span:.3} flux quanta (need >= {MIN_FLUX_SPAN})"
        )));
    }

    let voltages: Vec<f64> = points.iter().map(|p| p.0).collect();
    let freqs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));

    let mut theta = Vector4::new(
        initial_guess.ec_hz.ln(),
        initial_guess.ej_hz.ln(),
        initial_guess.flux_per_volt,
        initial_guess.flux_offset,
    );
    let (model, mut jac) = model_and_jacobian(&theta, &voltages);
    let mut residual = &freqs - &model;
    let mut cost = residual.norm_squared();
    let mut history = vec![(cost / points.len() as f64).sqrt()];

    // Nielsen damping: scale-free and robust in the flat ec/ej valley.
    let gram0 = jac.transpose() * &jac;
    let mut diag: Vec<f64> = (0..4).map(|i| gram0[(i, i)]).collect();
    let mut mu = 1e-3 * median(&mut diag);
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..LM_MAX_ITERATIONS {
        iterations += 1;
        let gram = jac.transpose() * &jac;
        let gradient = jac.transpose() * &residual;
        let damped = gram + Matrix4::identity() * mu;
        let step = match damped.cholesky() {
            Some(ch) => {
                let s = ch.solve(&gradient);
                Vector4::from_iterator(s.iter().copied())
            }
            None => {
                mu *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let rel_step = step.norm() / theta.norm().max(1e-300);
        let candidate = theta + step;
        let (new_model, new_jac) = model_and_jacobian(&candidate, &voltages);
        let new_residual = &freqs - &new_model;
        let new_cost = new_residual.norm_squared();
        let predicted = mu * step.norm_squared() + step.dot(&gradient);
        let rho = if predicted > 0.0 {
            (cost - new_cost) / predicted
        } else {
            -1.0
        };
        if rho > 0.0 {
            let rel_cost_drop = (cost - new_cost) / cost.max(1e-300);
            theta = candidate;
            jac = new_jac;
            residual = new_residual;
            cost = new_cost;
            history.push((cost / points.len() as f64).sqrt());
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if rel_step < LM_REL_STEP_TOL || rel_cost_drop < LM_REL_COST_TOL {
                converged = true;
                break;
            }
        } else {
            // A vanishing proposed step with no possible improvement means
            // we are at a stationary point.
            if rel_step < LM_REL_STEP_TOL {
                converged = true;
                break;
            }
            mu *= nu;
            nu *= 2.0;
        }
    }

    let params = TransmonParams {
        ec_hz: theta[0].exp(),
        ej_hz: theta[1].exp(),
        flux_per_volt: theta[2],
        flux_offset: theta[3],
    };
    let rms = (cost / points.len() as f64).sqrt();
    if !converged {
        return Err(Error::FitDiverged {
            iterations,
            ec_hz: params.ec_hz,
            ej_hz: params.ej_hz,
            flux_per_volt: params.flux_per_volt,
            flux_offset: params.flux_offset,
            rms_residual_hz: rms,
        });
    }
    Ok(SpectroscopyFit {
        params,
        rms_residual_hz: rms,
        iterations,
        residual_history: history,
    })
}
