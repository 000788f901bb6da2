//! Least-squares design of inverse IIR predistortion filters, residual FIR
//! correction, minimum-tap search under a log-NMSE threshold, and
//! correction-quality evaluation.
//!
//! IIR design uses the equation-error (series-parallel) formulation: the
//! feedback regressors are taken from the *target* signal, which keeps the
//! problem linear in all coefficients and is exact whenever the plant is
//! exactly invertible at the chosen orders.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::distortion::{apply_distortion, DistortionModel};
use crate::error::{Error, Result};
use crate::signal::{apply_fir, apply_iir, max_deviation, nmse_db, FirTaps, IirFilterSpec, Signal};

/// Poles this close to z = +1 are tolerated by the tap search when
/// integrator-style inverses are explicitly allowed (bias-tee correction).
pub const INTEGRATOR_POLE_TOLERANCE: f64 = 1e-6;

const CONDITION_FALLBACK: f64 = 1e10;
const CONDITION_SINGULAR: f64 = 1e12;

// ---------------------------------------------------------------------------
// Configuration and results
// ---------------------------------------------------------------------------

/// Inverse-IIR design configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    /// Feedback tap count `M_a` (may be zero).
    pub feedback_taps: usize,
    /// Feedforward tap count `M_b` (at least one).
    pub feedforward_taps: usize,
    /// Sample range the least-squares rows are drawn from.
    pub fit_window: Range<usize>,
    /// Nonnegative ridge weight added to the normal equations.
    pub regularization: f64,
}

/// A designed inverse filter with solver metadata. Unstable results are
/// flagged, not rejected; finite-window use may still be legitimate.
#[derive(Debug, Clone)]
pub struct IirDesign {
    pub filter: IirFilterSpec,
    pub stable: bool,
    /// Sum of squared equation-error residuals over the fit window.
    pub equation_error: f64,
    /// Condition estimate of the design matrix.
    pub condition: f64,
}

/// Options shared by every candidate of a tap search.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub fit_window: Range<usize>,
    pub regularization: f64,
    /// Accept candidates whose only off-circle poles sit within
    /// [`INTEGRATOR_POLE_TOLERANCE`] of z = +1 (marginal bias-tee inverses).
    pub allow_integrator_pole: bool,
}

/// Why a search candidate was not evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkipReason {
    Unstable,
    SingularSystem,
}

/// Outcome of [`search_min_taps`].
#[derive(Debug, Clone)]
pub struct TapSearchOutcome {
    pub feedback_taps: usize,
    pub feedforward_taps: usize,
    pub design: IirDesign,
    pub nmse_db: f64,
    /// True when the threshold was met; otherwise this is the best candidate.
    pub met: bool,
    /// Candidates skipped as unstable or singular, in search order.
    pub skipped: Vec<(usize, usize, SkipReason)>,
    /// Every evaluated `(M_a, M_b, nmse_db)` in search order.
    pub evaluated: Vec<(usize, usize, f64)>,
}

/// Quality metrics of a (possibly two-stage) correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub nmse_db: f64,
    pub max_dev_iir: f64,
    pub max_dev_fir: Option<f64>,
    pub m_a: usize,
    pub m_b: usize,
    pub fir_length: Option<usize>,
    pub stable: bool,
}

// ---------------------------------------------------------------------------
// Least-squares core
// ---------------------------------------------------------------------------

struct LsSolution {
    theta: DVector<f64>,
    residual: f64,
    condition: f64,
}

/// Solve `min ||X theta - y||^2 (+ ridge ||theta||^2)` by normal equations,
/// falling back to an SVD solve when the condition estimate exceeds 1e10.
fn solve_least_squares(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    ridge: f64,
    window: &Range<usize>,
) -> Result<LsSolution> {
    let gram = x.transpose() * x;
    let rhs = x.transpose() * y;
    let eigen = gram.clone().symmetric_eigenvalues();
    let max_eig = eigen.iter().fold(0.0f64, |m, &v| m.max(v.max(0.0)));
    let min_eig = eigen.iter().fold(f64::INFINITY, |m, &v| m.min(v.max(0.0)));
    if max_eig == 0.0 {
        return Err(Error::SingularSystem {
            window_start: window.start,
            window_end: window.end,
            detail: "design matrix is zero".into(),
        });
    }
    let condition = (max_eig / min_eig.max(f64::MIN_POSITIVE)).sqrt();
    if ridge == 0.0 && condition > 1.0 / RANK_TOLERANCE {
        return Err(Error::SingularSystem {
            window_start: window.start,
            window_end: window.end,
            detail: format!("rank-deficient design matrix (condition {condition:.3e})"),
        });
    }

    let theta = if ridge == 0.0 && condition > CONDITION_FALLBACK {
        let svd = x.clone().svd(true, true);
        svd.solve(y, max_eig.sqrt() * RANK_TOLERANCE)
            .map_err(|e| Error::SingularSystem {
                window_start: window.start,
                window_end: window.end,
                detail: e.to_string(),
            })?
    } else {
        let mut damped = gram;
        for i in 0..damped.nrows() {
            damped[(i, i)] += ridge;
        }
        match damped.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => {
                let svd = x.clone().svd(true, true);
                svd.solve(y, max_eig.sqrt() * RANK_TOLERANCE)
                    .map_err(|e| Error::SingularSystem {
                        window_start: window.start,
                        window_end: window.end,
                        detail: e.to_string(),
                    })?
            }
        }
    };
    let residual = (x * &theta - y).norm_squared();
    Ok(LsSolution {
        theta,
        residual,
        condition,
    })
}

fn sample_or_zero(signal: &Signal, n: isize) -> f64 {
    if n < 0 {
        0.0
    } else {
        signal.samples()[n as usize]
    }
}

fn check_window(window: &Range<usize>, len: usize, min_rows: usize) -> Result<()> {
    if window.start >= window.end || window.end > len {
        return Err(Error::InvalidArgument(format!(
            "fit window {}..{} out of bounds for signal length {len}",
            window.start, window.end
        )));
    }
    if window.end - window.start < min_rows {
        return Err(Error::InvalidArgument(format!(
            "fit window holds {} rows but the design needs at least {min_rows}",
            window.end - window.start
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Design operations
// ---------------------------------------------------------------------------

/// Equation-error least-squares inverse design: find coefficients so that the
/// filter maps `measured_step` onto `target_step` over the fit window.
pub fn design_inverse_iir(
    measured_step: &Signal,
    target_step: &Signal,
    config: &SynthesisConfig,
) -> Result<IirDesign> {
    if measured_step.len() != target_step.len() {
        return Err(Error::LengthMismatch {
            expected: measured_step.len(),
            got: target_step.len(),
        });
    }
    if measured_step.sample_rate() != target_step.sample_rate() {
        return Err(Error::InvalidArgument("sample rates differ".into()));
    }
    if config.feedforward_taps == 0 {
        return Err(Error::InvalidArgument("need at least one feedforward tap".into()));
    }
    if !(config.regularization >= 0.0) {
        return Err(Error::InvalidArgument("ridge weight must be nonnegative".into()));
    }
    let ma = config.feedback_taps;
    let mb = config.feedforward_taps;
    check_window(&config.fit_window, measured_step.len(), ma + mb)?;

    let rows = config.fit_window.len();
    let mut x = DMatrix::zeros(rows, mb + ma);
    let mut y = DVector::zeros(rows);
    for (k, n) in config.fit_window.clone().enumerate() {
        for i in 0..mb {
            x[(k, i)] = sample_or_zero(measured_step, n as isize - i as isize);
        }
        for j in 1..=ma {
            x[(k, mb + j - 1)] = sample_or_zero(target_step, n as isize - j as isize);
        }
        y[k] = target_step.samples()[n];
    }
    let sol = solve_least_squares(&x, &y, config.regularization, &config.fit_window)?;
    let feedforward = sol.theta.as_slice()[..mb].to_vec();
    let feedback = sol.theta.as_slice()[mb..].to_vec();
    let filter = IirFilterSpec::new(feedforward, feedback)?;
    let stable = filter.is_stable();
    Ok(IirDesign {
        filter,
        stable,
        equation_error: sol.residual,
        condition: sol.condition,
    })
}

/// Least-squares FIR fit of `target` from `corrected`, evaluated only at
/// rows with full tap memory (`n >= fir_length - 1`).
pub fn design_residual_fir(
    corrected_step: &Signal,
    target_step: &Signal,
    fir_length: usize,
    fit_window: Range<usize>,
) -> Result<FirTaps> {
    if corrected_step.len() != target_step.len() {
        return Err(Error::LengthMismatch {
            expected: corrected_step.len(),
            got: target_step.len(),
        });
    }
    if fir_length == 0 {
        return Err(Error::InvalidArgument("FIR length must be at least one".into()));
    }
    let start = fit_window.start.max(fir_length - 1);
    let window = start..fit_window.end;
    check_window(&window, corrected_step.len(), fir_length)?;

    let rows = window.len();
    let mut x = DMatrix::zeros(rows, fir_length);
    let mut y = DVector::zeros(rows);
    for (k, n) in window.clone().enumerate() {
        for i in 0..fir_length {
            x[(k, i)] = corrected_step.samples()[n - i];
        }
        y[k] = target_step.samples()[n];
    }
    let sol = solve_least_squares(&x, &y, 0.0, &window)?;
    FirTaps::new(sol.theta.as_slice().to_vec())
}

fn candidate_admissible(design: &IirDesign, allow_integrator: bool) -> bool {
    if design.stable {
        return true;
    }
    if !allow_integrator {
        return false;
    }
    design.filter.poles().iter().all(|p| {
        p.norm() < 1.0 - crate::signal::STABILITY_MARGIN
            || (p - num_complex::Complex64::new(1.0, 0.0)).norm() < INTEGRATOR_POLE_TOLERANCE
    })
}

/// Exhaustive tap search in ascending total-tap order (`M_a + M_b`, ties to
/// smaller `M_a`): returns the first candidate whose windowed NMSE meets the
/// threshold, else the best evaluated candidate flagged `met = false`.
/// Unstable and singular candidates are skipped and recorded.
pub fn search_min_taps(
    measured_step: &Signal,
    target_step: &Signal,
    threshold_db: f64,
    max_feedback_taps: usize,
    max_feedforward_taps: usize,
    options: &SearchOptions,
) -> Result<TapSearchOutcome> {
    if max_feedforward_taps == 0 {
        return Err(Error::InvalidArgument("max feedforward taps must be >= 1".into()));
    }
    let mut candidates: Vec<(usize, usize)> = (0..=max_feedback_taps)
        .flat_map(|ma| (1..=max_feedforward_taps).map(move |mb| (ma, mb)))
        .collect();
    candidates.sort_by_key(|&(ma, mb)| (ma + mb, ma));

    let mut skipped = Vec::new();
    let mut evaluated = Vec::new();
    let mut best: Option<TapSearchOutcome> = None;

    for (ma, mb) in candidates {
        let config = SynthesisConfig {
            feedback_taps: ma,
            feedforward_taps: mb,
            fit_window: options.fit_window.clone(),
            regularization: options.regularization,
        };
        let design = match design_inverse_iir(measured_step, target_step, &config) {
            Ok(d) => d,
            Err(Error::SingularSystem { .. }) => {
                skipped.push((ma, mb, SkipReason::SingularSystem));
                continue;
            }
            Err(e) => return Err(e),
        };
        if !candidate_admissible(&design, options.allow_integrator_pole) {
            skipped.push((ma, mb, SkipReason::Unstable));
            continue;
        }
        let corrected = apply_iir(measured_step, &design.filter);
        let nmse = nmse_db(
            &target_step.window(options.fit_window.clone())?,
            &corrected.window(options.fit_window.clone())?,
        )?;
        evaluated.push((ma, mb, nmse));
        let outcome = TapSearchOutcome {
            feedback_taps: ma,
            feedforward_taps: mb,
            design,
            nmse_db: nmse,
            met: nmse <= threshold_db,
            skipped: Vec::new(),
            evaluated: Vec::new(),
        };
        if nmse <= threshold_db {
            return Ok(TapSearchOutcome {
                skipped,
                evaluated,
                ..outcome
            });
        }
        if best.as_ref().map_or(true, |b| nmse < b.nmse_db) {
            best = Some(outcome);
        }
    }

    match best {
        Some(b) => Ok(TapSearchOutcome {
            skipped,
            evaluated,
            ..b
        }),
        None => Err(Error::SingularSystem {
            window_start: options.fit_window.start,
            window_end: options.fit_window.end,
            detail: "every tap-search candidate was skipped".into(),
        }),
    }
}

/// First sample at which the ideal target sits at full amplitude, plus one.
pub fn default_settle_index(target_step: &Signal) -> usize {
    let plateau = *target_step.samples().last().unwrap();
    let first_full = target_step
        .samples()
        .iter()
        .position(|&v| v == plateau)
        .unwrap_or(0);
    (first_full + 1).min(target_step.len() - 1)
}

/// Simulate the predistort -> distort chain and report deviations from the
/// ideal from `settle_index` onward. `distortion = None` means a clean chain.
pub fn evaluate_correction(
    distortion: Option<&DistortionModel>,
    iir: &IirFilterSpec,
    fir: Option<&FirTaps>,
    test_step: &Signal,
    settle_index: usize,
) -> Result<CorrectionReport> {
    if settle_index >= test_step.len() {
        return Err(Error::InvalidArgument(format!(
            "settle index {settle_index} out of range for length {}",
            test_step.len()
        )));
    }
    let ideal_level = *test_step.samples().last().unwrap();
    if ideal_level == 0.0 {
        return Err(Error::InvalidArgument("test step plateau must be nonzero".into()));
    }

    let chain = |signal: &Signal| -> Result<Signal> {
        match distortion {
            Some(model) => apply_distortion(model, signal),
            None => Ok(signal.clone()),
        }
    };

    let predistorted = apply_iir(test_step, iir);
    let iir_out = chain(&predistorted)?;
    let max_dev_iir = max_deviation(&iir_out, ideal_level, settle_index)?;

    let (final_out, max_dev_fir) = match fir {
        Some(taps) => {
            let out = chain(&apply_fir(&predistorted, taps))?;
            let dev = max_deviation(&out, ideal_level, settle_index)?;
            (out, Some(dev))
        }
        None => (iir_out, None),
    };

    let window = settle_index..test_step.len();
    let nmse = nmse_db(
        &test_step.window(window.clone())?,
        &final_out.window(window)?,
    )?;

    Ok(CorrectionReport {
        nmse_db: nmse,
        max_dev_iir,
        max_dev_fir,
        m_a: iir.feedback().len(),
        m_b: iir.feedforward().len(),
        fir_length: fir.map(FirTaps::len),
        stable: iir.is_stable(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::step_response;
    use crate::signal::make_step;
    use approx::assert_relative_eq;

    const FS: f64 = 2.4e9;

    fn overshoot(a: f64, tau: f64) -> DistortionModel {
        DistortionModel::ExponentialOvershoot {
            amplitude: a,
            time_constant: tau,
        }
    }

    fn full_window(s: &Signal) -> Range<usize> {
        0..s.len()
    }

    #[test]
    fn identity_plant_yields_unit_filter() {
        let step = make_step(1.0, 0.0, 100e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 0,
            feedforward_taps: 1,
            fit_window: full_window(&step),
            regularization: 0.0,
        };
        let design = design_inverse_iir(&step, &step, &config).unwrap();
        assert_relative_eq!(design.filter.feedforward()[0], 1.0, max_relative = 1e-12);
        assert!(design.stable);
        assert!(design.equation_error < 1e-18);
    }

    #[test]
    fn recovers_analytic_overshoot_inverse() {
        let (a, tau) = (0.1, 10e-9);
        let measured = step_response(&overshoot(a, tau), 1.0, 100e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 100e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: full_window(&target),
            regularization: 0.0,
        };
        let design = design_inverse_iir(&measured, &target, &config).unwrap();
        let r = (-1.0 / (FS * tau)).exp();
        assert_relative_eq!(design.filter.feedforward()[0], 1.0 / (1.0 + a), epsilon = 1e-9);
        assert_relative_eq!(design.filter.feedforward()[1], -r / (1.0 + a), epsilon = 1e-9);
        assert_relative_eq!(design.filter.feedback()[0], (r + a) / (1.0 + a), epsilon = 1e-9);
        assert!(design.stable);
        assert!(design.equation_error < 1e-18);

        let corrected = apply_iir(&measured, &design.filter);
        let nmse = nmse_db(&target, &corrected).unwrap();
        assert!(nmse < -100.0, "round-trip NMSE {nmse}");
    }

    #[test]
    fn bias_tee_inverse_is_marginal_integrator() {
        let tau = 100e-6;
        let model = DistortionModel::BiasTeeHighPass { time_constant: tau };
        let measured = step_response(&model, 1.0, 250e-6, FS).unwrap();
        let target = make_step(1.0, 0.0, 250e-6, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: full_window(&target),
            regularization: 0.0,
        };
        let design = design_inverse_iir(&measured, &target, &config).unwrap();
        let r = (-1.0 / (FS * tau)).exp();
        assert_relative_eq!(design.filter.feedforward()[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(design.filter.feedforward()[1], -r, epsilon = 1e-6);
        assert_relative_eq!(design.filter.feedback()[0], 1.0, epsilon = 1e-6);
        assert!(!design.stable, "bias-tee inverse pole sits on the unit circle");
    }

    #[test]
    fn collinear_regressors_are_reported_singular() {
        // measured == target makes the feedback column identical to a
        // feedforward column.
        let step = make_step(1.0, 0.0, 50e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: full_window(&step),
            regularization: 0.0,
        };
        match design_inverse_iir(&step, &step, &config) {
            Err(Error::SingularSystem { .. }) => {}
            other => panic!("expected singular system, got {other:?}"),
        }
    }

    #[test]
    fn residual_fir_identity_and_delay() {
        let corrected = step_response(&overshoot(0.2, 15e-9), 1.0, 80e-9, FS).unwrap();
        let g = design_residual_fir(&corrected, &corrected, 1, full_window(&corrected)).unwrap();
        assert_relative_eq!(g.taps()[0], 1.0, epsilon = 1e-10);

        // target runs one sample behind corrected -> exact delay taps [0, 1].
        let mut delayed = vec![0.0];
        delayed.extend_from_slice(&corrected.samples()[..corrected.len() - 1]);
        let target = Signal::new(delayed, FS).unwrap();
        let g = design_residual_fir(&corrected, &target, 2, full_window(&corrected)).unwrap();
        assert!(g.taps()[0].abs() < 1e-9);
        assert_relative_eq!(g.taps()[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn search_prefers_trivial_filter_without_distortion() {
        let step = make_step(1.0, 0.0, 50e-9, FS).unwrap();
        let options = SearchOptions {
            fit_window: full_window(&step),
            regularization: 0.0,
            allow_integrator_pole: false,
        };
        let outcome = search_min_taps(&step, &step, -30.0, 2, 4, &options).unwrap();
        assert!(outcome.met);
        assert_eq!((outcome.feedback_taps, outcome.feedforward_taps), (0, 1));
        assert_eq!(outcome.nmse_db, crate::signal::NMSE_IDENTICAL_DB);
    }

    #[test]
    fn search_finds_exact_overshoot_inverse_at_tight_threshold() {
        let measured = step_response(&overshoot(0.1, 10e-9), 1.0, 100e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 100e-9, FS).unwrap();
        let options = SearchOptions {
            fit_window: full_window(&target),
            regularization: 0.0,
            allow_integrator_pole: false,
        };
        // At -40 dB the scaled-identity candidates fail and the analytic
        // (1, 2) inverse is the first candidate through.
        let outcome = search_min_taps(&measured, &target, -40.0, 2, 4, &options).unwrap();
        assert!(outcome.met);
        assert_eq!((outcome.feedback_taps, outcome.feedforward_taps), (1, 2));
        for &(_, _, nmse) in &outcome.evaluated[..outcome.evaluated.len() - 1] {
            assert!(nmse > -40.0);
        }
    }

    #[test]
    fn equation_error_is_monotone_in_added_taps() {
        // Grid capped below the exact inverse order keeps residuals nonzero.
        let chain = DistortionModel::Cascade {
            stages: vec![
                overshoot(0.05, 8e-9),
                DistortionModel::SecondOrderAwg {
                    natural_frequency: 2.0 * std::f64::consts::PI / 5e-9,
                    damping: 0.7,
                },
            ],
        };
        let measured = step_response(&chain, 1.0, 200e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 200e-9, FS).unwrap();
        let mut residuals = std::collections::HashMap::new();
        for ma in 0..=2usize {
            for mb in 1..=3usize {
                let config = SynthesisConfig {
                    feedback_taps: ma,
                    feedforward_taps: mb,
                    fit_window: full_window(&target),
                    regularization: 0.0,
                };
                if let Ok(design) = design_inverse_iir(&measured, &target, &config) {
                    residuals.insert((ma, mb), design.equation_error);
                }
            }
        }
        for (&(ma1, mb1), &r1) in &residuals {
            for (&(ma2, mb2), &r2) in &residuals {
                if ma2 >= ma1 && mb2 >= mb1 {
                    assert!(
                        r2 <= r1 * (1.0 + 1e-9) + 1e-18,
                        "residual grew from ({ma1},{mb1})={r1} to ({ma2},{mb2})={r2}"
                    );
                }
            }
        }
    }

    #[test]
    fn design_is_scale_invariant() {
        let measured = step_response(&overshoot(0.1, 10e-9), 1.0, 80e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 80e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: full_window(&target),
            regularization: 0.0,
        };
        let base = design_inverse_iir(&measured, &target, &config).unwrap();
        let scale = 7.25;
        let measured_scaled =
            Signal::new(measured.samples().iter().map(|v| scale * v).collect(), FS).unwrap();
        let target_scaled =
            Signal::new(target.samples().iter().map(|v| scale * v).collect(), FS).unwrap();
        let scaled = design_inverse_iir(&measured_scaled, &target_scaled, &config).unwrap();
        for (b0, b1) in base
            .filter
            .feedforward()
            .iter()
            .zip(scaled.filter.feedforward())
        {
            assert_relative_eq!(b0, b1, epsilon = 1e-9);
        }
        for (a0, a1) in base.filter.feedback().iter().zip(scaled.filter.feedback()) {
            assert_relative_eq!(a0, a1, epsilon = 1e-9);
        }
    }

    #[test]
    fn predistortion_commutes_with_distortion() {
        let model = overshoot(0.1, 10e-9);
        let measured = step_response(&model, 1.0, 80e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 80e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: full_window(&target),
            regularization: 0.0,
        };
        let design = design_inverse_iir(&measured, &target, &config).unwrap();
        let pre_then_distort =
            apply_distortion(&model, &apply_iir(&target, &design.filter)).unwrap();
        let distort_then_pre =
            apply_iir(&apply_distortion(&model, &target).unwrap(), &design.filter);
        for (a, b) in pre_then_distort
            .samples()
            .iter()
            .zip(distort_then_pre.samples())
        {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn evaluate_correction_identity_and_exact_inverse() {
        let step = make_step(1.0, 0.0, 50e-9, FS).unwrap();
        let identity = IirFilterSpec::new(vec![1.0], vec![]).unwrap();
        let report = evaluate_correction(None, &identity, None, &step, 1).unwrap();
        assert_eq!(report.max_dev_iir, 0.0);
        assert_eq!(report.max_dev_fir, None);
        assert_eq!(report.nmse_db, crate::signal::NMSE_IDENTICAL_DB);

        let model = overshoot(0.1, 10e-9);
        let measured = step_response(&model, 1.0, 100e-9, FS).unwrap();
        let target = make_step(1.0, 0.0, 100e-9, FS).unwrap();
        let config = SynthesisConfig {
            feedback_taps: 1,
            feedforward_taps: 2,
            fit_window: 0..target.len(),
            regularization: 0.0,
        };
        let design = design_inverse_iir(&measured, &target, &config).unwrap();
        let report =
            evaluate_correction(Some(&model), &design.filter, None, &target, 1).unwrap();
        assert!(report.max_dev_iir < 1e-9, "deviation {}", report.max_dev_iir);
        assert!(report.stable);
    }

    #[test]
    fn default_settle_is_one_past_full_amplitude() {
        let step = make_step(2.0, 3.0, 10.0, 1.0).unwrap();
        assert_eq!(default_settle_index(&step), 4);
        let immediate = make_step(1.0, 0.0, 6.0, 1.0).unwrap();
        assert_eq!(default_settle_index(&immediate), 1);
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let report = CorrectionReport {
            nmse_db: -45.0,
            max_dev_iir: 0.004,
            max_dev_fir: Some(0.0009),
            m_a: 0,
            m_b: 4,
            fir_length: Some(48),
            stable: true,
        };
        let json = serde_json::to_string(&report).unwrap();
        for key in ["nmse_db", "max_dev_iir", "max_dev_fir", "m_a", "m_b", "fir_length", "stable"] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }
}
