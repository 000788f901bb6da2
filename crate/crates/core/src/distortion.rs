//! Classical distortion models of the flux-control chain: under-damped
//! second-order AWG response, exponential over/undershoot of the cryogenic
//! flux line, and bias-tee high-pass decay, plus cascades of those.
//!
//! Each model carries a continuous-time description and discretizes to a
//! difference equation: step-invariant mapping for the first-order models
//! (they are specified by their step responses) and the bilinear transform
//! for the second-order model (specified in the Laplace domain).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{apply_iir, make_step, IirFilterSpec, Signal};

/// Oversampling factor required of `discretize`: the sample rate must be at
/// least this multiple of the model's fastest rate.
const MIN_OVERSAMPLING: f64 = 10.0;

/// A distortion stage (or chain) acting on the flux-control signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistortionModel {
    /// Under-damped second-order low-pass, `H(s) = wn^2 / (s^2 + 2 z wn s + wn^2)`.
    SecondOrderAwg {
        #[serde(rename = "natural_frequency_rad_per_s")]
        natural_frequency: f64,
        #[serde(rename = "damping_ratio")]
        damping: f64,
    },
    /// Unit step maps to `1 + A exp(-t/tau)`; `A > 0` overshoots, `-1 < A < 0`
    /// undershoots.
    ExponentialOvershoot {
        amplitude: f64,
        #[serde(rename = "time_constant_s")]
        time_constant: f64,
    },
    /// One-pole high-pass whose unit-step response is `exp(-t/tau)`.
    #[serde(rename = "bias_tee")]
    BiasTeeHighPass {
        #[serde(rename = "time_constant_s")]
        time_constant: f64,
    },
    /// Stages applied in listed order (first element closest to the source).
    Cascade { stages: Vec<DistortionModel> },
}

impl DistortionModel {
    /// Check parameter invariants (recursively for cascades).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::SecondOrderAwg {
                natural_frequency,
                damping,
            } => {
                if !(natural_frequency > &0.0) || !natural_frequency.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "natural frequency must be positive, got {natural_frequency}"
                    )));
                }
                if !(*damping > 0.0 && *damping < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "damping ratio must satisfy 0 < zeta < 1 (under-damped), got {damping}"
                    )));
                }
                Ok(())
            }
            Self::ExponentialOvershoot {
                amplitude,
                time_constant,
            } => {
                if !(*amplitude > -1.0) || !amplitude.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "overshoot amplitude must exceed -1, got {amplitude}"
                    )));
                }
                if !(time_constant > &0.0) || !time_constant.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "time constant must be positive, got {time_constant}"
                    )));
                }
                Ok(())
            }
            Self::BiasTeeHighPass { time_constant } => {
                if !(time_constant > &0.0) || !time_constant.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "time constant must be positive, got {time_constant}"
                    )));
                }
                Ok(())
            }
            Self::Cascade { stages } => {
                if stages.is_empty() {
                    return Err(Error::InvalidArgument("cascade must hold at least one stage".into()));
                }
                stages.iter().try_for_each(Self::validate)
            }
        }
    }

    /// Diagnostics for parameters outside the typical hardware ranges
    /// (AWG natural period 1-100 ns, overshoot tau 1 ns - 10 us, bias-tee
    /// tau 10 us - 10 ms). Values outside are accepted but worth flagging.
    pub fn table_range_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        self.collect_range_warnings(&mut warnings);
        warnings
    }

    fn collect_range_warnings(&self, out: &mut Vec<String>) {
        match self {
            Self::SecondOrderAwg {
                natural_frequency, ..
            } => {
                let period = 2.0 * std::f64::consts::PI / natural_frequency;
                if !(1e-9..=100e-9).contains(&period) {
                    out.push(format!(
                        "second-order natural period {period:.3e} s outside the typical AWG range [1 ns, 100 ns]"
                    ));
                }
            }
            Self::ExponentialOvershoot { time_constant, .. } => {
                if !(1e-9..=10e-6).contains(time_constant) {
                    out.push(format!(
                        "overshoot time constant {time_constant:.3e} s outside the typical flux-line range [1 ns, 10 us]"
                    ));
                }
            }
            Self::BiasTeeHighPass { time_constant } => {
                if !(10e-6..=10e-3).contains(time_constant) {
                    out.push(format!(
                        "bias-tee time constant {time_constant:.3e} s outside the typical range [10 us, 10 ms]"
                    ));
                }
            }
            Self::Cascade { stages } => {
                for stage in stages {
                    stage.collect_range_warnings(out);
                }
            }
        }
    }

    /// Minimum sample rate accepted by [`discretize`].
    pub fn minimum_sample_rate(&self) -> f64 {
        match self {
            Self::SecondOrderAwg {
                natural_frequency, ..
            } => MIN_OVERSAMPLING * natural_frequency / (2.0 * std::f64::consts::PI),
            Self::ExponentialOvershoot { time_constant, .. }
            | Self::BiasTeeHighPass {
                time_constant,
            } => MIN_OVERSAMPLING / time_constant,
            Self::Cascade { stages } => stages
                .iter()
                .map(Self::minimum_sample_rate)
                .fold(0.0, f64::max),
        }
    }
}

/// A model discretized at a specific sample rate.
#[derive(Debug, Clone)]
pub struct DigitalFilterRealization {
    filter: IirFilterSpec,
    sample_rate: f64,
}

impl DigitalFilterRealization {
    pub fn filter(&self) -> &IirFilterSpec {
        &self.filter
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

/// Convolution of two coefficient vectors.
fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Compose two difference equations into one (transfer-function product).
fn combine(first: &IirFilterSpec, second: &IirFilterSpec) -> IirFilterSpec {
    let b = convolve(first.feedforward(), second.feedforward());
    // Denominators are stored as 1 - sum a_j z^-j.
    let den = |f: &IirFilterSpec| {
        let mut d = vec![1.0];
        d.extend(f.feedback().iter().map(|a| -a));
        d
    };
    let d = convolve(&den(first), &den(second));
    let feedback = d[1..].iter().map(|c| -c).collect();
    IirFilterSpec::new(b, feedback).expect("products of valid coefficients are valid")
}

fn single_stage_coefficients(model: &DistortionModel, sample_rate: f64) -> IirFilterSpec {
    let ts = 1.0 / sample_rate;
    match model {
        DistortionModel::ExponentialOvershoot {
            amplitude: a,
            time_constant: tau,
        } => {
            // Step-invariant: unit step maps to 1 + A r^n, r = exp(-Ts/tau).
            let r = (-ts / tau).exp();
            IirFilterSpec::new(vec![1.0 + a, -(r + a)], vec![r]).unwrap()
        }
        DistortionModel::BiasTeeHighPass { time_constant: tau } => {
            // Step-invariant: unit step maps to r^n; zero exactly at z = 1.
            let r = (-ts / tau).exp();
            IirFilterSpec::new(vec![1.0, -1.0], vec![r]).unwrap()
        }
        DistortionModel::SecondOrderAwg {
            natural_frequency: wn,
            damping: zeta,
        } => {
            // Bilinear transform of wn^2 / (s^2 + 2 zeta wn s + wn^2).
            let k = 2.0 * sample_rate;
            let d0 = k * k + 2.0 * zeta * wn * k + wn * wn;
            let d1 = 2.0 * (wn * wn - k * k);
            let d2 = k * k - 2.0 * zeta * wn * k + wn * wn;
            let g = wn * wn / d0;
            IirFilterSpec::new(vec![g, 2.0 * g, g], vec![-d1 / d0, -d2 / d0]).unwrap()
        }
        DistortionModel::Cascade { .. } => unreachable!("cascades handled by discretize"),
    }
}

/// Discretize `model` at `sample_rate`, composing cascade stages into a
/// single difference equation.
pub fn discretize(model: &DistortionModel, sample_rate: f64) -> Result<DigitalFilterRealization> {
    model.validate()?;
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let required = model.minimum_sample_rate();
    if sample_rate < required {
        return Err(Error::Undersampled {
            required_hz: required,
            got_hz: sample_rate,
        });
    }
    let filter = match model {
        DistortionModel::Cascade { stages } => {
            let mut combined: Option<IirFilterSpec> = None;
            for stage in stages {
                let stage_filter = discretize(stage, sample_rate)?.filter;
                combined = Some(match combined {
                    None => stage_filter,
                    Some(f) => combine(&f, &stage_filter),
                });
            }
            combined.expect("cascade validated non-empty")
        }
        single => single_stage_coefficients(single, sample_rate),
    };
    Ok(DigitalFilterRealization {
        filter,
        sample_rate,
    })
}

/// Sampled step response of the model at the given amplitude.
pub fn step_response(
    model: &DistortionModel,
    amplitude: f64,
    duration_s: f64,
    sample_rate_hz: f64,
) -> Result<Signal> {
    let realization = discretize(model, sample_rate_hz)?;
    let step = make_step(amplitude, 0.0, duration_s, sample_rate_hz)?;
    Ok(apply_iir(&step, realization.filter()))
}

/// Run `input` through the model discretized at the input's sample rate.
pub fn apply_distortion(model: &DistortionModel, input: &Signal) -> Result<Signal> {
    let realization = discretize(model, input.sample_rate())?;
    Ok(apply_iir(input, realization.filter()))
}

// ---------------------------------------------------------------------------
// Rise-time helpers
// ---------------------------------------------------------------------------

/// Continuous under-damped second-order unit step response.
fn second_order_step(wn: f64, zeta: f64, t: f64) -> f64 {
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    1.0 - (-zeta * wn * t).exp()
        * ((wd * t).cos() + zeta / (1.0 - zeta * zeta).sqrt() * (wd * t).sin())
}

fn crossing_time(wn: f64, zeta: f64, level: f64) -> f64 {
    // The response rises monotonically to its first peak at t = pi/wd.
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI / wd);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if second_order_step(wn, zeta, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 10-90% rise time of the under-damped second-order step response.
pub fn rise_time_10_90(natural_frequency: f64, damping: f64) -> Result<f64> {
    DistortionModel::SecondOrderAwg {
        natural_frequency,
        damping,
    }
    .validate()?;
    Ok(crossing_time(natural_frequency, damping, 0.9) - crossing_time(natural_frequency, damping, 0.1))
}

/// Natural frequency giving the requested 10-90% rise time at fixed damping.
/// Rise time scales as `1/wn`, so this is exact, not an approximation.
pub fn natural_frequency_for_rise_time(rise_time_s: f64, damping: f64) -> Result<f64> {
    if !(rise_time_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rise time must be positive, got {rise_time_s}"
        )));
    }
    Ok(rise_time_10_90(1.0, damping)? / rise_time_s)
}
