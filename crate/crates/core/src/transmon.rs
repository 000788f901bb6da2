//! Forward physics of the flux-tunable transmon: flux-to-frequency map and
//! its inverse, the linear voltage-to-flux map, simulated 2D flux
//! spectroscopy, and simulated Ramsey-style (Cryoscope) traces with finite
//! coherence. These simulators are the oracles the reconstruction side is
//! tested against.
//!
//! Energies are stored as frequencies (`E/h` in Hz) and flux in units of the
//! flux quantum, so no physical constants appear in the arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Superconducting flux quantum `h / 2e` in webers.
pub const FLUX_QUANTUM_WB: f64 = 2.067833848e-15;

/// Tolerance for the relative non-uniformity of a duration sweep.
const UNIFORM_SPACING_TOL: f64 = 1e-12;

/// Tolerance (in samples) for durations landing on the waveform grid.
const GRID_ALIGNMENT_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Transmon energies and the linear voltage-to-flux map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Charging energy over h, in Hz.
    pub ec_hz: f64,
    /// Josephson energy over h, in Hz.
    pub ej_hz: f64,
    /// Flux quanta per volt on the flux line.
    pub flux_per_volt: f64,
    /// Applied flux at zero voltage, in flux quanta.
    pub flux_offset: f64,
}

impl TransmonParams {
    pub fn new(ec_hz: f64, ej_hz: f64, flux_per_volt: f64, flux_offset: f64) -> Result<Self> {
        let params = Self {
            ec_hz,
            ej_hz,
            flux_per_volt,
            flux_offset,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ec_hz > 0.0) || !(self.ej_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "energies must be positive, got ec {} Hz, ej {} Hz",
                self.ec_hz, self.ej_hz
            )));
        }
        if self.ej_hz / self.ec_hz < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "ej/ec = {} is below 1; not a transmon",
                self.ej_hz / self.ec_hz
            )));
        }
        if !self.flux_per_volt.is_finite() || !self.flux_offset.is_finite() {
            return Err(Error::InvalidArgument("flux map coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Diagnostics for parameter regimes worth flagging.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.ej_hz / self.ec_hz;
        if ratio < 10.0 {
            out.push(format!(
                "ej/ec = {ratio:.2} is below 10; outside the usual transmon regime"
            ));
        }
        out
    }
}

/// Qubit coherence times bounding the usable evolution window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceParams {
    pub t1_s: f64,
    pub t2_star_s: f64,
}

impl CoherenceParams {
    pub fn new(t1_s: f64, t2_star_s: f64) -> Result<Self> {
        if !(t1_s > 0.0) || !(t2_star_s > 0.0) {
            return Err(Error::InvalidArgument("coherence times must be positive".into()));
        }
        if t2_star_s > 2.0 * t1_s {
            return Err(Error::InvalidArgument(format!(
                "t2* = {t2_star_s} s exceeds 2*t1 = {} s",
                2.0 * t1_s
            )));
        }
        Ok(Self { t1_s, t2_star_s })
    }
}

// ---------------------------------------------------------------------------
// Trace and map containers
// ---------------------------------------------------------------------------

/// Ramsey-style measurement record: X- and Y-basis excited-state populations
/// per pulse duration.
#[derive(Debug, Clone, PartialEq)]
pub struct CryoscopeTrace {
    durations_s: Vec<f64>,
    p_x: Vec<f64>,
    p_y: Vec<f64>,
}

impl CryoscopeTrace {
    pub fn new(durations_s: Vec<f64>, p_x: Vec<f64>, p_y: Vec<f64>) -> Result<Self> {
        if durations_s.len() != p_x.len() || durations_s.len() != p_y.len() {
            return Err(Error::InvalidArgument(format!(
                "trace columns disagree: {} durations, {} p_x, {} p_y",
                durations_s.len(),
                p_x.len(),
                p_y.len()
            )));
        }
        if durations_s.is_empty() {
            return Err(Error::InvalidArgument("trace must hold at least one point".into()));
        }
        check_uniform(&durations_s)?;
        let clamp = |v: &f64, name: &str, i: usize| -> Result<f64> {
            if !(-1e-9..=1.0 + 1e-9).contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "{name}[{i}] = {v} outside [0, 1]"
                )));
            }
            Ok(v.clamp(0.0, 1.0))
        };
        let p_x = p_x
            .iter()
            .enumerate()
            .map(|(i, v)| clamp(v, "p_x", i))
            .collect::<Result<_>>()?;
        let p_y = p_y
            .iter()
            .enumerate()
            .map(|(i, v)| clamp(v, "p_y", i))
            .collect::<Result<_>>()?;
        Ok(Self {
            durations_s,
            p_x,
            p_y,
        })
    }

    pub fn durations_s(&self) -> &[f64] {
        &self.durations_s
    }

    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn len(&self) -> usize {
        self.durations_s.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Duration step of the sweep (zero for a single-point trace).
    pub fn delta_tau_s(&self) -> f64 {
        if self.durations_s.len() < 2 {
            0.0
        } else {
            self.durations_s[1] - self.durations_s[0]
        }
    }
}

fn check_uniform(durations: &[f64]) -> Result<()> {
    if durations.len() < 2 {
        return Ok(());
    }
    let dt = durations[1] - durations[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(
            "durations must be strictly increasing".into(),
        ));
    }
    for i in 2..durations.len() {
        let step = durations[i] - durations[i - 1];
        if (step - dt).abs() > UNIFORM_SPACING_TOL * dt.abs() {
            return Err(Error::InvalidArgument(format!(
                "duration spacing is not uniform at index {i}: {step} vs {dt}"
            )));
        }
    }
    Ok(())
}

/// 2D flux spectroscopy result: transmission magnitude per (voltage, probe
/// frequency) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectroscopyMap {
    voltages_v: Vec<f64>,
    probe_frequencies_hz: Vec<f64>,
    /// `response[i][j]` for voltage `i`, probe frequency `j`.
    response: Vec<Vec<f64>>,
}

impl SpectroscopyMap {
    pub fn new(
        voltages_v: Vec<f64>,
        probe_frequencies_hz: Vec<f64>,
        response: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if voltages_v.is_empty() || probe_frequencies_hz.is_empty() {
            return Err(Error::InvalidArgument("spectroscopy axes must be non-empty".into()));
        }
        if response.len() != voltages_v.len()
            || response.iter().any(|row| row.len() != probe_frequencies_hz.len())
        {
            return Err(Error::InvalidArgument(
                "response matrix dimensions do not match the axes".into(),
            ));
        }
        if response.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("response entries must be finite".into()));
        }
        Ok(Self {
            voltages_v,
            probe_frequencies_hz,
            response,
        })
    }

    pub fn voltages_v(&self) -> &[f64] {
        &self.voltages_v
    }

    pub fn probe_frequencies_hz(&self) -> &[f64] {
        &self.probe_frequencies_hz
    }

    pub fn response(&self) -> &[Vec<f64>] {
        &self.response
    }
}

// ---------------------------------------------------------------------------
// Flux / frequency maps
// ---------------------------------------------------------------------------

/// Qubit frequency at `flux` (in flux quanta):
/// `sqrt(8 ec ej |cos(pi flux)|) - ec`.
pub fn flux_to_frequency(params: &TransmonParams, flux: f64) -> f64 {
    (8.0 * params.ec_hz * params.ej_hz * (std::f64::consts::PI * flux).cos().abs()).sqrt()
        - params.ec_hz
}

/// Sweet-spot (maximum) qubit frequency.
pub fn max_frequency(params: &TransmonParams) -> f64 {
    (8.0 * params.ec_hz * params.ej_hz).sqrt() - params.ec_hz
}

/// Principal-branch inverse of [`flux_to_frequency`], returning a flux in
/// `[0, 0.5]`. Frequencies outside `[-ec, f_max]` are rejected.
pub fn frequency_to_flux(params: &TransmonParams, frequency_hz: f64) -> Result<f64> {
    let fmax = max_frequency(params);
    if frequency_hz < -params.ec_hz || frequency_hz > fmax {
        // Allow float dust at the top of the band from forward evaluations.
        let arg = (frequency_hz + params.ec_hz).powi(2) / (8.0 * params.ec_hz * params.ej_hz);
        if frequency_hz > fmax && arg <= 1.0 + 1e-12 {
            return Ok(0.0);
        }
        return Err(Error::InvalidArgument(format!(
            "frequency {frequency_hz} Hz outside the attainable band [{}, {fmax}] Hz",
            -params.ec_hz
        )));
    }
    let arg = (frequency_hz + params.ec_hz).powi(2) / (8.0 * params.ec_hz * params.ej_hz);
    Ok(arg.min(1.0).acos() / std::f64::consts::PI)
}

/// Linear flux-line transfer: `flux_per_volt * voltage + flux_offset`.
pub fn voltage_to_flux(params: &TransmonParams, voltage_v: f64) -> f64 {
    params.flux_per_volt * voltage_v + params.flux_offset
}

// ---------------------------------------------------------------------------
// Simulators
// ---------------------------------------------------------------------------

/// Simulate a 2D flux spectroscopy map. Each cell holds
/// `1 - contrast * L(f - f_q(v); linewidth)` with a unit-peak Lorentzian of
/// FWHM `linewidth_hz`, plus seeded Gaussian noise.
pub fn simulate_spectroscopy(
    params: &TransmonParams,
    voltages_v: &[f64],
    probe_frequencies_hz: &[f64],
    linewidth_hz: f64,
    contrast: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<SpectroscopyMap> {
    params.validate()?;
    if !(linewidth_hz > 0.0) {
        return Err(Error::InvalidArgument("linewidth must be positive".into()));
    }
    if voltages_v.is_empty() || probe_frequencies_hz.is_empty() {
        return Err(Error::InvalidArgument("spectroscopy axes must be non-empty".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidArgument("noise sd must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let mut response = Vec::with_capacity(voltages_v.len());
    for &v in voltages_v {
        let fq = flux_to_frequency(params, voltage_to_flux(params, v));
        let mut row = Vec::with_capacity(probe_frequencies_hz.len());
        for &f in probe_frequencies_hz {
            let delta = 2.0 * (f - fq) / linewidth_hz;
            let mut value = 1.0 - contrast / (1.0 + delta * delta);
            if noise_sd > 0.0 {
                value += normal.sample(&mut rng);
            }
            row.push(value);
        }
        response.push(row);
    }
    SpectroscopyMap::new(voltages_v.to_vec(), probe_frequencies_hz.to_vec(), response)
}

/// Accumulated Ramsey phase for each duration:
/// `phi(tau) = 2 pi * integral_0^tau (f_q(flux(t)) - f_q(baseline)) dt`,
/// integrated by the trapezoidal rule on the waveform grid with durations
/// snapped to grid samples.
pub fn accumulated_phases(
    params: &TransmonParams,
    flux_waveform: &Signal,
    baseline_flux: f64,
    durations_s: &[f64],
) -> Result<Vec<f64>> {
    params.validate()?;
    let ts = 1.0 / flux_waveform.sample_rate();
    let f_base = flux_to_frequency(params, baseline_flux);
    let detuning: Vec<f64> = flux_waveform
        .samples()
        .iter()
        .map(|phi| flux_to_frequency(params, *phi) - f_base)
        .collect();
    // Cumulative trapezoid: integral[m] covers 0..m*ts.
    let mut integral = vec![0.0; detuning.len()];
    for m in 1..detuning.len() {
        integral[m] = integral[m - 1] + 0.5 * (detuning[m - 1] + detuning[m]) * ts;
    }
    durations_s
        .iter()
        .map(|&tau| {
            if !(tau >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative duration {tau}")));
            }
            let exact = tau * flux_waveform.sample_rate();
            let m = exact.round();
            if (exact - m).abs() > GRID_ALIGNMENT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "duration {tau} s does not land on the waveform sample grid (offset {} samples)",
                    exact - m
                )));
            }
            let m = m as usize;
            if m >= flux_waveform.len() {
                return Err(Error::InvalidArgument(format!(
                    "duration {tau} s exceeds the waveform span of {} samples",
                    flux_waveform.len()
                )));
            }
            Ok(2.0 * std::f64::consts::PI * integral[m])
        })
        .collect()
}

/// Simulate a Cryoscope sweep over `durations_s` against the distorted flux
/// waveform. Populations decay with `exp(-tau/t2*)` contrast; Gaussian
/// readout noise is seeded and the result clamped to `[0, 1]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cryoscope(
    params: &TransmonParams,
    coherence: &CoherenceParams,
    flux_waveform: &Signal,
    baseline_flux: f64,
    durations_s: &[f64],
    readout_noise_sd: f64,
    seed: u64,
) -> Result<CryoscopeTrace> {
    if durations_s.is_empty() {
        return Err(Error::InvalidArgument("need at least one duration".into()));
    }
    check_uniform(durations_s)?;
    if !(readout_noise_sd >= 0.0) {
        return Err(Error::InvalidArgument("noise sd must be nonnegative".into()));
    }
    let phases = accumulated_phases(params, flux_waveform, baseline_flux, durations_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, readout_noise_sd.max(f64::MIN_POSITIVE)).expect("valid sd");
    let mut p_x = Vec::with_capacity(durations_s.len());
    let mut p_y = Vec::with_capacity(durations_s.len());
    for (tau, phi) in durations_s.iter().zip(&phases) {
        let contrast = (-tau / coherence.t2_star_s).exp();
        let mut px = 0.5 * (1.0 + contrast * phi.cos());
        let mut py = 0.5 * (1.0 + contrast * phi.sin());
        if readout_noise_sd > 0.0 {
            px += normal.sample(&mut rng);
            py += normal.sample(&mut rng);
        }
        p_x.push(px.clamp(0.0, 1.0));
        p_y.push(py.clamp(0.0, 1.0));
    }
    CryoscopeTrace::new(durations_s.to_vec(), p_x, p_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> TransmonParams {
        TransmonParams::new(0.2e9, 15e9, 0.1, 0.0).unwrap()
    }

    #[test]
    fn frequency_at_sweet_spot() {
        // sqrt(8 * 0.2 * 15) GHz - 0.2 GHz = sqrt(24) - 0.2 GHz.
        let f = flux_to_frequency(&params(), 0.0);
        assert_relative_eq!(f, (24e18f64).sqrt() - 0.2e9, max_relative = 1e-12);
        assert_relative_eq!(f / 1e9, 4.6990, max_relative = 1e-4);
    }

    #[test]
    fn frequency_at_half_quantum_is_minus_ec() {
        let f = flux_to_frequency(&params(), 0.5);
        assert_relative_eq!(f, -0.2e9, max_relative = 1e-6);
    }

    #[test]
    fn frequency_is_periodic_and_even() {
        let p = params();
        for flux in [0.05, 0.17, 0.33, 0.49] {
            let f = flux_to_frequency(&p, flux);
            assert_relative_eq!(flux_to_frequency(&p, -flux), f, max_relative = 1e-12);
            assert_relative_eq!(flux_to_frequency(&p, flux + 1.0), f, max_relative = 1e-12);
        }
    }

    #[test]
    fn flux_frequency_round_trip_over_principal_branch() {
        let p = params();
        let mut worst = 0.0f64;
        for k in 0..1000 {
            let flux = 0.5 * k as f64 / 999.0;
            let back = frequency_to_flux(&p, flux_to_frequency(&p, flux)).unwrap();
            worst = worst.max((back - flux).abs());
        }
        assert!(worst < 1e-12, "round-trip error {worst}");
    }

    #[test]
    fn frequency_out_of_band_is_rejected() {
        let p = params();
        let fmax = max_frequency(&p);
        assert!(frequency_to_flux(&p, fmax + 1.0).is_err());
        assert!(frequency_to_flux(&p, -p.ec_hz - 1.0).is_err());
        assert_relative_eq!(frequency_to_flux(&p, fmax).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(frequency_to_flux(&p, -p.ec_hz).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn voltage_map_is_affine() {
        let p = TransmonParams::new(0.2e9, 15e9, 0.1, -0.05).unwrap();
        assert_eq!(voltage_to_flux(&p, 0.0), -0.05);
        assert_relative_eq!(voltage_to_flux(&p, 0.5), 0.0, epsilon = 1e-15);
        let delta1 = voltage_to_flux(&p, 1.0) - p.flux_offset;
        let delta2 = voltage_to_flux(&p, 2.0) - p.flux_offset;
        assert_relative_eq!(delta2, 2.0 * delta1, max_relative = 1e-12);
    }

    #[test]
    fn transmon_regime_checks() {
        assert!(TransmonParams::new(1e9, 0.5e9, 0.1, 0.0).is_err());
        let marginal = TransmonParams::new(1e9, 5e9, 0.1, 0.0).unwrap();
        assert_eq!(marginal.warnings().len(), 1);
        assert!(params().warnings().is_empty());
        assert!(CoherenceParams::new(10e-6, 25e-6).is_err());
    }

    #[test]
    fn spectroscopy_dip_sits_at_qubit_frequency() {
        let p = params();
        let fq = flux_to_frequency(&p, voltage_to_flux(&p, 1.0));
        let probes: Vec<f64> = (0..101).map(|i| fq - 50e6 + i as f64 * 1e6).collect();
        let map = simulate_spectroscopy(&p, &[1.0], &probes, 5e6, 0.8, 0.0, 1).unwrap();
        let row = &map.response()[0];
        let min_idx = row
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_relative_eq!(probes[min_idx], fq, epsilon = 0.5e6);
        assert_relative_eq!(row[min_idx], 0.2, epsilon = 1e-9);
    }

    #[test]
    fn zero_contrast_map_is_flat_and_seeds_are_reproducible() {
        let p = params();
        let probes = [4.5e9, 4.6e9];
        let flat = simulate_spectroscopy(&p, &[0.0, 1.0], &probes, 5e6, 0.0, 0.0, 3).unwrap();
        assert!(flat.response().iter().flatten().all(|&v| v == 1.0));

        let a = simulate_spectroscopy(&p, &[0.0, 1.0], &probes, 5e6, 0.5, 0.02, 7).unwrap();
        let b = simulate_spectroscopy(&p, &[0.0, 1.0], &probes, 5e6, 0.5, 0.02, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_spectroscopy(&p, &[0.0, 1.0], &probes, 5e6, 0.5, 0.02, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn constant_detuning_gives_linear_phase() {
        let p = params();
        let fs = 2.4e9;
        let baseline = 0.3;
        let f_base = flux_to_frequency(&p, baseline);
        // A flux held exactly at +10 MHz detuning from baseline.
        let plateau = frequency_to_flux(&p, f_base + 10e6).unwrap();
        let n = 200;
        let wave = Signal::new(vec![plateau; n], fs).unwrap();
        // Effectively infinite coherence so only the phase matters.
        let coherence = CoherenceParams::new(1e5, 1e5).unwrap();
        let tau = 120.0 / fs; // 50 ns at 2.4 GSa/s
        let durations: Vec<f64> = (0..=120).map(|k| k as f64 / fs).collect();
        let trace =
            simulate_cryoscope(&p, &coherence, &wave, baseline, &durations, 0.0, 0).unwrap();
        assert_relative_eq!(tau, 50e-9, max_relative = 1e-12);
        // phi(50 ns) = 2 pi * 10 MHz * 50 ns = pi.
        let last = trace.len() - 1;
        assert_relative_eq!(trace.p_x()[last], 0.0, epsilon = 1e-9);
        assert_relative_eq!(trace.p_y()[last], 0.5, epsilon = 1e-7);

        // Additivity of the accumulated phase for a constant detuning.
        let phis = accumulated_phases(&p, &wave, baseline, &[30.0 / fs, 50.0 / fs, 80.0 / fs])
            .unwrap();
        assert_relative_eq!(phis[0] + phis[1], phis[2], max_relative = 1e-9);
    }

    #[test]
    fn zero_excursion_shows_pure_decay() {
        let p = params();
        let fs = 2.4e9;
        let wave = Signal::new(vec![0.25; 400], fs).unwrap();
        let coherence = CoherenceParams::new(21.5e-6, 4.9e-6).unwrap();
        let durations: Vec<f64> = (0..300).map(|k| k as f64 / fs).collect();
        let trace = simulate_cryoscope(&p, &coherence, &wave, 0.25, &durations, 0.0, 0).unwrap();
        for (k, tau) in durations.iter().enumerate() {
            let expected = 0.5 * (1.0 + (-tau / coherence.t2_star_s).exp());
            assert_relative_eq!(trace.p_x()[k], expected, max_relative = 1e-12);
            assert_relative_eq!(trace.p_y()[k], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn bloch_vector_length_depends_only_on_decay() {
        let p = params();
        let fs = 2.4e9;
        let baseline = 0.3;
        let plateau =
            frequency_to_flux(&p, flux_to_frequency(&p, baseline) - 25e6).unwrap();
        let wave = Signal::new(vec![plateau; 1000], fs).unwrap();
        let coherence = CoherenceParams::new(21.5e-6, 4.9e-6).unwrap();
        let durations: Vec<f64> = (0..900).step_by(3).map(|k| k as f64 / fs).collect();
        let trace =
            simulate_cryoscope(&p, &coherence, &wave, baseline, &durations, 0.0, 0).unwrap();
        for k in 0..trace.len() {
            let x = 2.0 * trace.p_x()[k] - 1.0;
            let y = 2.0 * trace.p_y()[k] - 1.0;
            let expected = (-2.0 * durations[k] / coherence.t2_star_s).exp();
            assert_relative_eq!(x * x + y * y, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn cryoscope_is_bitwise_deterministic_per_seed() {
        let p = params();
        let fs = 2.4e9;
        let wave = Signal::new(vec![0.2; 300], fs).unwrap();
        let coherence = CoherenceParams::new(21.5e-6, 4.9e-6).unwrap();
        let durations: Vec<f64> = (0..200).map(|k| k as f64 / fs).collect();
        let a = simulate_cryoscope(&p, &coherence, &wave, 0.19, &durations, 0.01, 11).unwrap();
        let b = simulate_cryoscope(&p, &coherence, &wave, 0.19, &durations, 0.01, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn durations_must_stay_in_span_and_on_grid() {
        let p = params();
        let fs = 2.4e9;
        let wave = Signal::new(vec![0.2; 100], fs).unwrap();
        let coherence = CoherenceParams::new(21.5e-6, 4.9e-6).unwrap();
        let too_long = vec![0.0, 200.0 / fs];
        assert!(simulate_cryoscope(&p, &coherence, &wave, 0.2, &too_long, 0.0, 0).is_err());
        let off_grid = vec![0.0, 1.37 / fs];
        assert!(simulate_cryoscope(&p, &coherence, &wave, 0.2, &off_grid, 0.0, 0).is_err());
        let nonuniform = vec![0.0, 1.0 / fs, 3.0 / fs];
        assert!(simulate_cryoscope(&p, &coherence, &wave, 0.2, &nonuniform, 0.0, 0).is_err());
    }
}
