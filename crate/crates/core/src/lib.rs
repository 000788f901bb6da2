//! Simulation, characterization, and digital-predistortion synthesis for the
//! flux-control signal chain of flux-tunable superconducting qubits.
//!
//! The crate models the classical distortion chain (AWG second-order
//! response, cryogenic flux-line overshoot, bias-tee high-pass), simulates
//! the qubit-side Ramsey/Cryoscope measurement that senses the distorted
//! flux, reconstructs the voltage-to-flux step response from those traces,
//! and synthesizes two-stage IIR + FIR correction filters that linearize it.
//!
//! Module map:
//! - [`signal`]: sampled waveforms, IIR/FIR difference equations, NMSE and
//!   deviation metrics.
//! - [`distortion`]: the classical distortion models and their
//!   discretization.
//! - [`synthesis`]: equation-error least-squares inverse design, residual
//!   FIR fitting, minimum-tap search, correction evaluation.
//! - [`transmon`]: flux-frequency physics and the spectroscopy/Cryoscope
//!   simulators.
//! - [`reconstruction`]: phase extraction, unwrapping, differentiation,
//!   flux-response reconstruction, and the spectroscopy parameter fit.
//! - [`io`]: the CSV formats shared by the command-line pipeline.

pub mod distortion;
pub mod error;
pub mod io;
pub mod reconstruction;
pub mod signal;
pub mod synthesis;
pub mod transmon;

pub use error::{Error, Result};
pub use signal::{
    apply_fir, apply_iir, make_step, max_deviation, nmse_db, FirTaps, IirFilterSpec, Signal,
    NMSE_IDENTICAL_DB,
};
pub use distortion::{
    apply_distortion, discretize, step_response, DigitalFilterRealization, DistortionModel,
};
pub use reconstruction::{
    detuning_to_flux_response, extract_peaks, extract_phase, extract_phase_with_floor,
    fit_spectroscopy, phase_to_detuning, unwrap_phase, FluxResponse, PeakExtraction, PhaseSeries,
    SpectroscopyFit,
};
pub use synthesis::{
    design_inverse_iir, design_residual_fir, evaluate_correction, search_min_taps,
    CorrectionReport, IirDesign, SearchOptions, SkipReason, SynthesisConfig, TapSearchOutcome,
};
pub use transmon::{
    accumulated_phases, flux_to_frequency, frequency_to_flux, max_frequency,
    simulate_cryoscope, simulate_spectroscopy, voltage_to_flux, CoherenceParams, CryoscopeTrace,
    SpectroscopyMap, TransmonParams,
};
