//! Uniformly sampled real-valued signals, step generation, IIR/FIR difference
//! equations, and error metrics.
//!
//! The difference equation convention used throughout is
//!
//! ```text
//! y[n] = sum_i b_i x[n-i] + sum_j a_j y[n-j]
//! ```
//!
//! with feedforward taps `b_0..b_{Mb-1}`, feedback taps `a_1..a_{Ma}`, and
//! zero initial conditions (samples at negative indices are zero). Stability
//! is governed by the roots of `1 - sum_j a_j z^{-j}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

/// Poles must satisfy `|p| < 1 - STABILITY_MARGIN` to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Sentinel NMSE for bitwise-identical signals (zero error energy).
pub const NMSE_IDENTICAL_DB: f64 = f64::MIN;

// ---------------------------------------------------------------------------
// Signal
// ---------------------------------------------------------------------------

/// A uniformly sampled real-valued waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Signal {
    /// Wrap samples taken at `sample_rate` Hz.
    ///
    /// Requires a positive finite rate, at least one sample, and all samples
    /// finite.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal must hold at least one sample".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample {} at index {i}",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    /// Time of sample `i` in seconds.
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate
    }

    /// Copy of the samples in `range`, keeping the sample rate.
    pub fn window(&self, range: Range<usize>) -> Result<Signal> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "window {}..{} out of bounds for length {}",
                range.start,
                range.end,
                self.len()
            )));
        }
        Signal::new(self.samples[range].to_vec(), self.sample_rate)
    }
}

// ---------------------------------------------------------------------------
// Filter coefficient containers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IirCoefficients {
    feedforward: Vec<f64>,
    feedback: Vec<f64>,
}

/// IIR difference-equation coefficients (feedback possibly empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IirCoefficients", into = "IirCoefficients")]
pub struct IirFilterSpec {
    feedforward: Vec<f64>,
    feedback: Vec<f64>,
}

impl IirFilterSpec {
    pub fn new(feedforward: Vec<f64>, feedback: Vec<f64>) -> Result<Self> {
        if feedforward.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one feedforward coefficient is required".into(),
            ));
        }
        if feedforward.iter().chain(feedback.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("filter coefficients must be finite".into()));
        }
        Ok(Self { feedforward, feedback })
    }

    /// Pure feedforward (FIR) filter.
    pub fn from_fir(taps: &FirTaps) -> Self {
        Self {
            feedforward: taps.taps().to_vec(),
            feedback: Vec::new(),
        }
    }

    pub fn feedforward(&self) -> &[f64] {
        &self.feedforward
    }

    pub fn feedback(&self) -> &[f64] {
        &self.feedback
    }

    /// Roots of `1 - sum_j a_j z^{-j}` (empty for FIR filters).
    pub fn poles(&self) -> Vec<Complex64> {
        let m = self.feedback.len();
        match m {
            0 => Vec::new(),
            1 => vec![Complex64::new(self.feedback[0], 0.0)],
            _ => {
                // Companion matrix of z^m - a_1 z^{m-1} - ... - a_m.
                let companion = nalgebra::DMatrix::from_fn(m, m, |i, j| {
                    if i == 0 {
                        self.feedback[j]
                    } else if i == j + 1 {
                        1.0
                    } else {
                        0.0
                    }
                });
                companion.complex_eigenvalues().iter().copied().collect()
            }
        }
    }

    /// True when every pole lies strictly inside the unit circle
    /// (`|p| < 1 - STABILITY_MARGIN`).
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0 - STABILITY_MARGIN)
    }

    /// Steady-state gain for a constant input, `sum(b) / (1 - sum(a))`.
    /// Infinite when the denominator vanishes (pole at z = 1).
    pub fn dc_gain(&self) -> f64 {
        let num: f64 = self.feedforward.iter().sum();
        let den: f64 = 1.0 - self.feedback.iter().sum::<f64>();
        num / den
    }
}

impl TryFrom<IirCoefficients> for IirFilterSpec {
    type Error = Error;

    fn try_from(raw: IirCoefficients) -> Result<Self> {
        IirFilterSpec::new(raw.feedforward, raw.feedback)
    }
}

impl From<IirFilterSpec> for IirCoefficients {
    fn from(spec: IirFilterSpec) -> Self {
        IirCoefficients {
            feedforward: spec.feedforward,
            feedback: spec.feedback,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FirCoefficients {
    taps: Vec<f64>,
}

/// FIR tap vector `g_0..g_{L-1}`, `L >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FirCoefficients", into = "FirCoefficients")]
pub struct FirTaps {
    taps: Vec<f64>,
}

impl FirTaps {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidArgument("FIR filter needs at least one tap".into()));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("FIR taps must be finite".into()));
        }
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<FirCoefficients> for FirTaps {
    type Error = Error;

    fn try_from(raw: FirCoefficients) -> Result<Self> {
        FirTaps::new(raw.taps)
    }
}

impl From<FirTaps> for FirCoefficients {
    fn from(taps: FirTaps) -> Self {
        FirCoefficients { taps: taps.taps }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Step waveform: sample `n` equals `amplitude` when `n/sample_rate >= delay`,
/// zero before. Length is `round(total_duration * sample_rate)`.
pub fn make_step(
    amplitude: f64,
    delay_s: f64,
    total_duration_s: f64,
    sample_rate_hz: f64,
) -> Result<Signal> {
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(delay_s >= 0.0) || !(total_duration_s > delay_s) {
        return Err(Error::InvalidArgument(format!(
            "need total_duration > delay >= 0, got delay {delay_s}, duration {total_duration_s}"
        )));
    }
    if !amplitude.is_finite() {
        return Err(Error::InvalidArgument("amplitude must be finite".into()));
    }
    let n = (total_duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "duration shorter than one sample period".into(),
        ));
    }
    let samples = (0..n)
        .map(|i| {
            if i as f64 / sample_rate_hz >= delay_s {
                amplitude
            } else {
                0.0
            }
        })
        .collect();
    Signal::new(samples, sample_rate_hz)
}

/// Run the difference equation over `input` with zero initial conditions.
/// Output length and sample rate match the input.
pub fn apply_iir(input: &Signal, filter: &IirFilterSpec) -> Signal {
    let x = input.samples();
    let b = filter.feedforward();
    let a = filter.feedback();
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let mut acc = 0.0;
        for (i, bi) in b.iter().enumerate() {
            if n >= i {
                acc += bi * x[n - i];
            }
        }
        for (j, aj) in a.iter().enumerate() {
            if n >= j + 1 {
                acc += aj * y[n - j - 1];
            }
        }
        y[n] = acc;
    }
    Signal {
        samples: y,
        sample_rate: input.sample_rate(),
    }
}

/// Causal convolution truncated to the input length; identical to `apply_iir`
/// with empty feedback.
pub fn apply_fir(input: &Signal, taps: &FirTaps) -> Signal {
    apply_iir(input, &IirFilterSpec::from_fir(taps))
}

/// Normalized mean-squared error in dB:
/// `10 log10( sum (test-ref)^2 / sum ref^2 )`, computed over the full window.
///
/// Returns [`NMSE_IDENTICAL_DB`] when the error energy is exactly zero.
pub fn nmse_db(reference: &Signal, test: &Signal) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: test.len(),
        });
    }
    if reference.sample_rate() != test.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "sample rates differ: {} vs {}",
            reference.sample_rate(),
            test.sample_rate()
        )));
    }
    let ref_energy: f64 = reference.samples().iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(Error::InvalidArgument("reference signal is all-zero".into()));
    }
    let err_energy: f64 = reference
        .samples()
        .iter()
        .zip(test.samples())
        .map(|(r, t)| (t - r) * (t - r))
        .sum();
    if err_energy == 0.0 {
        return Ok(NMSE_IDENTICAL_DB);
    }
    Ok(10.0 * (err_energy / ref_energy).log10())
}

/// Largest relative deviation from `ideal_level` over samples
/// `start_index..`: `max |response[n]/ideal_level - 1|`.
pub fn max_deviation(response: &Signal, ideal_level: f64, start_index: usize) -> Result<f64> {
    if start_index >= response.len() {
        return Err(Error::InvalidArgument(format!(
            "start index {start_index} out of range for length {}",
            response.len()
        )));
    }
    if ideal_level == 0.0 || !ideal_level.is_finite() {
        return Err(Error::InvalidArgument("ideal level must be finite and nonzero".into()));
    }
    Ok(response.samples()[start_index..]
        .iter()
        .map(|s| (s / ideal_level - 1.0).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sig(samples: &[f64]) -> Signal {
        Signal::new(samples.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn step_zero_delay_unit() {
        let s = make_step(1.0, 0.0, 4.0, 1.0).unwrap();
        assert_eq!(s.samples(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn step_shifted() {
        let s = make_step(2.0, 2.0, 5.0, 1.0).unwrap();
        assert_eq!(s.samples(), &[0.0, 0.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn step_zero_amplitude() {
        let s = make_step(0.0, 0.0, 3.0, 1.0).unwrap();
        assert!(s.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_rejects_bad_args() {
        assert!(make_step(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(make_step(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(make_step(1.0, 2.0, 1.0, 1.0).is_err());
        assert!(make_step(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn iir_identity() {
        let f = IirFilterSpec::new(vec![1.0], vec![]).unwrap();
        let x = sig(&[0.3, -1.0, 2.5]);
        assert_eq!(apply_iir(&x, &f).samples(), x.samples());
    }

    #[test]
    fn iir_geometric_feedback() {
        let f = IirFilterSpec::new(vec![1.0], vec![0.5]).unwrap();
        let x = sig(&[1.0, 0.0, 0.0, 0.0]);
        let y = apply_iir(&x, &f);
        assert_eq!(y.samples(), &[1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn iir_moving_average_of_step() {
        let f = IirFilterSpec::new(vec![0.5, 0.5], vec![]).unwrap();
        let x = sig(&[1.0, 1.0, 1.0]);
        assert_eq!(apply_iir(&x, &f).samples(), &[0.5, 1.0, 1.0]);
    }

    #[test]
    fn fir_delay_and_difference() {
        let x = sig(&[3.0, 5.0, 7.0]);
        let delay = FirTaps::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(apply_fir(&x, &delay).samples(), &[0.0, 3.0, 5.0]);

        let step = sig(&[1.0, 1.0, 1.0, 1.0]);
        let diff = FirTaps::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(apply_fir(&step, &diff).samples(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nmse_identical_is_sentinel() {
        let x = sig(&[1.0, 2.0, 3.0]);
        assert_eq!(nmse_db(&x, &x).unwrap(), NMSE_IDENTICAL_DB);
    }

    #[test]
    fn nmse_uniform_ten_percent() {
        let r = sig(&[1.0, 1.0, 1.0, 1.0]);
        let t = sig(&[1.1, 1.1, 1.1, 1.1]);
        assert_relative_eq!(nmse_db(&r, &t).unwrap(), -20.0, max_relative = 1e-10);
    }

    #[test]
    fn nmse_zero_db_when_error_equals_reference() {
        let r = sig(&[2.0, 0.0]);
        let t = sig(&[0.0, 0.0]);
        assert_relative_eq!(nmse_db(&r, &t).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nmse_rejects_all_zero_reference_and_mismatch() {
        let z = sig(&[0.0, 0.0]);
        let t = sig(&[1.0, 1.0]);
        assert!(matches!(nmse_db(&z, &t), Err(Error::InvalidArgument(_))));
        let short = sig(&[1.0]);
        assert!(matches!(nmse_db(&t, &short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn max_deviation_examples() {
        assert_eq!(max_deviation(&sig(&[1.0, 1.0, 1.0]), 1.0, 0).unwrap(), 0.0);
        // From start 1, deviations are {0.01, 0.0065}; max is 0.01.
        let r = sig(&[0.5, 0.99, 1.0065]);
        assert_relative_eq!(max_deviation(&r, 1.0, 1).unwrap(), 0.01, max_relative = 1e-9);
        let r2 = sig(&[1.1, 1.0]);
        assert_relative_eq!(max_deviation(&r2, 1.0, 0).unwrap(), 0.1, max_relative = 1e-12);
        assert!(max_deviation(&r2, 1.0, 2).is_err());
        assert!(max_deviation(&r2, 0.0, 0).is_err());
    }

    #[test]
    fn pole_computation_and_stability() {
        // 1 - 1.2 z^-1 + 0.36 z^-2 has a double root at 0.6.
        let f = IirFilterSpec::new(vec![1.0], vec![1.2, -0.36]).unwrap();
        let mut mags: Vec<f64> = f.poles().iter().map(|p| p.norm()).collect();
        mags.sort_by(f64::total_cmp);
        assert_relative_eq!(mags[0], 0.6, max_relative = 1e-9);
        assert_relative_eq!(mags[1], 0.6, max_relative = 1e-9);
        assert!(f.is_stable());

        let marginal = IirFilterSpec::new(vec![1.0], vec![1.0]).unwrap();
        assert!(!marginal.is_stable());
    }

    #[test]
    fn stable_impulse_response_decays() {
        // Horizon of ten decades of the slowest pole: |h| ends below 1e-6 of peak.
        for feedback in [vec![0.9], vec![1.2, -0.36], vec![-0.8]] {
            let f = IirFilterSpec::new(vec![1.0, 0.3], feedback).unwrap();
            let rho = f.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
            let horizon = (10.0 / -rho.log10()).ceil() as usize;
            let mut impulse = vec![0.0; horizon + 1];
            impulse[0] = 1.0;
            let h = apply_iir(&Signal::new(impulse, 1.0).unwrap(), &f);
            let peak = h.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(
                h.samples()[horizon].abs() < 1e-6 * peak,
                "final {} vs peak {}",
                h.samples()[horizon],
                peak
            );
        }
    }

    proptest! {
        #[test]
        fn fir_equals_iir_with_empty_feedback(
            x in proptest::collection::vec(-10.0f64..10.0, 1..60),
            taps in proptest::collection::vec(-2.0f64..2.0, 1..6),
        ) {
            let signal = Signal::new(x, 2.0).unwrap();
            let fir = FirTaps::new(taps.clone()).unwrap();
            let via_fir = apply_fir(&signal, &fir);
            let via_iir = apply_iir(&signal, &IirFilterSpec::new(taps, vec![]).unwrap());
            prop_assert_eq!(via_fir.samples(), via_iir.samples());
        }

        #[test]
        fn filtering_is_linear(
            x in proptest::collection::vec(-5.0f64..5.0, 4..40),
            z in proptest::collection::vec(-5.0f64..5.0, 4..40),
            b in proptest::collection::vec(-2.0f64..2.0, 1..4),
            a1 in -0.9f64..0.9,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let n = x.len().min(z.len());
            let filter = IirFilterSpec::new(b, vec![a1]).unwrap();
            let xs = Signal::new(x[..n].to_vec(), 1.0).unwrap();
            let zs = Signal::new(z[..n].to_vec(), 1.0).unwrap();
            let mixed: Vec<f64> = (0..n).map(|i| alpha * xs.samples()[i] + beta * zs.samples()[i]).collect();
            let lhs = apply_iir(&Signal::new(mixed, 1.0).unwrap(), &filter);
            let yx = apply_iir(&xs, &filter);
            let yz = apply_iir(&zs, &filter);
            for i in 0..n {
                let rhs = alpha * yx.samples()[i] + beta * yz.samples()[i];
                let scale = rhs.abs().max(1.0);
                prop_assert!((lhs.samples()[i] - rhs).abs() <= 1e-12 * scale,
                    "sample {}: {} vs {}", i, lhs.samples()[i], rhs);
            }
        }

        #[test]
        fn filtering_is_time_invariant(
            x in proptest::collection::vec(-5.0f64..5.0, 4..30),
            b in proptest::collection::vec(-2.0f64..2.0, 1..4),
            a1 in -0.9f64..0.9,
            k in 1usize..5,
        ) {
            let filter = IirFilterSpec::new(b, vec![a1]).unwrap();
            let direct = apply_iir(&Signal::new(x.clone(), 1.0).unwrap(), &filter);
            let mut delayed = vec![0.0; k];
            delayed.extend_from_slice(&x);
            let shifted = apply_iir(&Signal::new(delayed, 1.0).unwrap(), &filter);
            for i in 0..x.len() {
                let d = direct.samples()[i];
                let s = shifted.samples()[i + k];
                let scale = d.abs().max(1.0);
                prop_assert!((d - s).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn nmse_is_scale_invariant(
            r in proptest::collection::vec(0.1f64..5.0, 2..30),
            e in proptest::collection::vec(-1.0f64..1.0, 2..30),
            c in prop::sample::select(vec![-7.5f64, -0.25, 0.5, 3.0, 1e3]),
        ) {
            let n = r.len().min(e.len());
            let reference = Signal::new(r[..n].to_vec(), 1.0).unwrap();
            let test: Vec<f64> = (0..n).map(|i| r[i] + e[i]).collect();
            let test = Signal::new(test, 1.0).unwrap();
            let base = nmse_db(&reference, &test).unwrap();
            let scaled_ref = Signal::new(reference.samples().iter().map(|v| c * v).collect(), 1.0).unwrap();
            let scaled_test = Signal::new(test.samples().iter().map(|v| c * v).collect(), 1.0).unwrap();
            let scaled = nmse_db(&scaled_ref, &scaled_test).unwrap();
            if base != NMSE_IDENTICAL_DB {
                prop_assert!((base - scaled).abs() < 1e-9, "{} vs {}", base, scaled);
            }
        }
    }
}
