//! JSON configuration schema for the pipeline commands.
//!
//! All physical quantities are SI with unit-suffixed key names. Unknown
//! fields are rejected so typos surface as config errors.

use serde::Deserialize;
use std::path::PathBuf;

use fluxdpd::distortion::DistortionModel;
use fluxdpd::transmon::{CoherenceParams, TransmonParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub pulse: Option<PulseConfig>,
    /// Single distortion chain (cryoscope / calibrate); `null` or absent
    /// means a distortion-free chain.
    #[serde(default)]
    pub distortion: Option<DistortionModel>,
    /// Labeled models for `simulate-distortion`.
    #[serde(default)]
    pub distortions: Option<Vec<LabeledDistortion>>,
    #[serde(default)]
    pub transmon: Option<TransmonConfig>,
    #[serde(default)]
    pub coherence: Option<CoherenceConfig>,
    #[serde(default)]
    pub tau_sweep: Option<TauSweepConfig>,
    #[serde(default)]
    pub synthesis: Option<SynthesisSettings>,
    #[serde(default)]
    pub spectroscopy: Option<SpectroscopyConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub amplitude_v: f64,
    #[serde(default)]
    pub delay_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDistortion {
    pub label: String,
    /// `null` models a distortion-free chain.
    pub model: Option<DistortionModel>,
    /// Per-model override of the shared synthesis settings.
    #[serde(default)]
    pub synthesis: Option<SynthesisSettings>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub ec_hz: f64,
    pub ej_hz: f64,
    pub flux_per_volt_phi0_per_v: f64,
    #[serde(default)]
    pub flux_offset_phi0: f64,
}

impl TransmonConfig {
    pub fn build(&self) -> CliResult<TransmonParams> {
        TransmonParams::new(
            self.ec_hz,
            self.ej_hz,
            self.flux_per_volt_phi0_per_v,
            self.flux_offset_phi0,
        )
        .map_err(|e| CliError::Config(format!("transmon: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceConfig {
    pub t1_s: f64,
    pub t2_star_s: f64,
}

impl CoherenceConfig {
    pub fn build(&self) -> CliResult<CoherenceParams> {
        CoherenceParams::new(self.t1_s, self.t2_star_s)
            .map_err(|e| CliError::Config(format!("coherence: {e}")))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSweepConfig {
    #[serde(default)]
    pub start_s: f64,
    pub stop_s: f64,
    pub step_s: f64,
}

impl TauSweepConfig {
    /// Materialize the sweep as explicit durations.
    pub fn durations(&self, sample_rate_hz: f64) -> CliResult<Vec<f64>> {
        if !(self.step_s > 0.0) || !(self.stop_s > self.start_s) || !(self.start_s >= 0.0) {
            return Err(CliError::Config(format!(
                "tau sweep needs stop > start >= 0 and step > 0, got start {}, stop {}, step {}",
                self.start_s, self.stop_s, self.step_s
            )));
        }
        if self.step_s * sample_rate_hz < 1.0 - 1e-9 {
            return Err(CliError::Config(format!(
                "tau step {} s is below the sample period {} s",
                self.step_s,
                1.0 / sample_rate_hz
            )));
        }
        let n = ((self.stop_s - self.start_s) / self.step_s + 0.5).floor() as usize + 1;
        Ok((0..n).map(|k| self.start_s + k as f64 * self.step_s).collect())
    }
}

fn default_threshold() -> f64 {
    -30.0
}
fn default_max_feedback() -> usize {
    2
}
fn default_max_feedforward() -> usize {
    4
}
fn default_fir_length() -> usize {
    48
}
fn default_normalization_start() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSettings {
    #[serde(default = "default_threshold")]
    pub threshold_db: f64,
    #[serde(default = "default_max_feedback")]
    pub max_feedback_taps: usize,
    #[serde(default = "default_max_feedforward")]
    pub max_feedforward_taps: usize,
    #[serde(default = "default_fir_length")]
    pub fir_length: usize,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub allow_integrator_pole: bool,
    /// First sample used in the least-squares fit window.
    #[serde(default)]
    pub fit_window_start_index: usize,
    /// One past the last fit sample; defaults to the trace length.
    #[serde(default)]
    pub fit_window_end_index: Option<usize>,
    /// Deviations are evaluated from here on; defaults to one past the
    /// target step edge.
    #[serde(default)]
    pub settle_index: Option<usize>,
    /// Start of the mean-normalization window of reconstructed responses.
    #[serde(default = "default_normalization_start")]
    pub normalization_start_index: usize,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            threshold_db: default_threshold(),
            max_feedback_taps: default_max_feedback(),
            max_feedforward_taps: default_max_feedforward(),
            fir_length: default_fir_length(),
            ridge: 0.0,
            allow_integrator_pole: false,
            fit_window_start_index: 0,
            fit_window_end_index: None,
            settle_index: None,
            normalization_start_index: default_normalization_start(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisConfig {
    pub fn values(&self, name: &str) -> CliResult<Vec<f64>> {
        if self.count < 1 {
            return Err(CliError::Config(format!("{name}: count must be >= 1")));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        if !(self.stop > self.start) {
            return Err(CliError::Config(format!("{name}: stop must exceed start")));
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count).map(|i| self.start + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopyConfig {
    pub voltages_v: AxisConfig,
    pub probe_frequencies_hz: AxisConfig,
    pub linewidth_hz: f64,
    pub contrast: f64,
    /// Starting point for the parameter fit (defaults to the `transmon`
    /// section when absent).
    #[serde(default)]
    pub initial_guess: Option<TransmonConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub readout_sd: f64,
    #[serde(default)]
    pub spectroscopy_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Config {
    /// Parse a config file, mapping any syntax or schema problem to a
    /// config error (exit code 2) with serde's line/column diagnostics.
    pub fn load(path: &std::path::Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Config = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !(config.sample_rate_hz > 0.0) || !config.sample_rate_hz.is_finite() {
            return Err(CliError::Config(format!(
                "sample_rate_hz must be positive, got {}",
                config.sample_rate_hz
            )));
        }
        Ok((config, bytes))
    }

    pub fn require_pulse(&self) -> CliResult<&PulseConfig> {
        self.pulse
            .as_ref()
            .ok_or_else(|| CliError::Config("missing 'pulse' section".into()))
    }

    pub fn require_transmon(&self) -> CliResult<&TransmonConfig> {
        self.transmon
            .as_ref()
            .ok_or_else(|| CliError::Config("missing 'transmon' section".into()))
    }

    pub fn require_coherence(&self) -> CliResult<&CoherenceConfig> {
        self.coherence
            .as_ref()
            .ok_or_else(|| CliError::Config("missing 'coherence' section".into()))
    }

    pub fn require_tau_sweep(&self) -> CliResult<&TauSweepConfig> {
        self.tau_sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("missing 'tau_sweep' section".into()))
    }

    pub fn require_spectroscopy(&self) -> CliResult<&SpectroscopyConfig> {
        self.spectroscopy
            .as_ref()
            .ok_or_else(|| CliError::Config("missing 'spectroscopy' section".into()))
    }

    pub fn synthesis(&self) -> SynthesisSettings {
        self.synthesis.clone().unwrap_or_default()
    }

    pub fn noise(&self) -> NoiseConfig {
        self.noise.unwrap_or_default()
    }
}
