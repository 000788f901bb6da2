//! Implementations of the pipeline subcommands. Every command reads its
//! inputs, computes the full result, and only then commits output files
//! through an [`OutputStage`], so failures leave no partial files.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use fluxdpd::distortion::{apply_distortion, DistortionModel};
use fluxdpd::io;
use fluxdpd::reconstruction::{
    detuning_to_flux_response, extract_peaks, extract_phase, fit_spectroscopy, phase_to_detuning,
    FluxResponse, PhaseSeries,
};
use fluxdpd::signal::{apply_fir, apply_iir, make_step, FirTaps, IirFilterSpec, Signal};
use fluxdpd::synthesis::{
    default_settle_index, design_residual_fir, evaluate_correction, search_min_taps,
    CorrectionReport, SearchOptions, SkipReason, TapSearchOutcome,
};
use fluxdpd::transmon::{
    simulate_cryoscope, simulate_spectroscopy, voltage_to_flux, CoherenceParams, CryoscopeTrace,
    TransmonParams,
};

use crate::config::{Config, SynthesisSettings};
use crate::error::{CliError, CliResult};
use crate::stage::OutputStage;

pub struct CommandContext {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub verbose: bool,
    pub config_sha256: String,
}

impl CommandContext {
    fn seed(&self, config: &Config) -> u64 {
        self.seed_override.unwrap_or(config.noise().seed)
    }

    fn warn(&self, message: &str) {
        eprintln!("warning: {message}");
    }
}

// ---------------------------------------------------------------------------
// Shared JSON shapes
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchSummary {
    pub met: bool,
    pub threshold_db: f64,
    pub m_a: usize,
    pub m_b: usize,
    pub nmse_db: f64,
    pub skipped: Vec<SkippedCandidate>,
    pub evaluated: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub m_a: usize,
    pub m_b: usize,
    pub reason: String,
}

impl SearchSummary {
    fn from_outcome(outcome: &TapSearchOutcome, threshold_db: f64) -> Self {
        SearchSummary {
            met: outcome.met,
            threshold_db,
            m_a: outcome.feedback_taps,
            m_b: outcome.feedforward_taps,
            nmse_db: outcome.nmse_db,
            skipped: outcome
                .skipped
                .iter()
                .map(|(ma, mb, reason)| SkippedCandidate {
                    m_a: *ma,
                    m_b: *mb,
                    reason: match reason {
                        SkipReason::Unstable => "unstable".into(),
                        SkipReason::SingularSystem => "singular".into(),
                    },
                })
                .collect(),
            evaluated: outcome.evaluated.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub tool_version: String,
    pub created_unix_s: u64,
}

impl Provenance {
    fn new(ctx: &CommandContext) -> Self {
        Provenance {
            config_sha256: ctx.config_sha256.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: String,
    pub report: CorrectionReport,
    pub search: SearchSummary,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub iir: IirFilterSpec,
    pub fir: FirTaps,
    pub report: CorrectionReport,
    pub search: SearchSummary,
    pub settle_index: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub ec_hz: f64,
    pub ej_hz: f64,
    pub flux_per_volt: f64,
    pub flux_offset: f64,
    pub rms_residual_hz: f64,
    pub iterations: usize,
    pub points_used: usize,
    pub skipped_columns: Vec<usize>,
    pub provenance: Provenance,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Other(format!("cannot serialize result: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

fn voltage_step(config: &Config) -> CliResult<Signal> {
    let pulse = config.require_pulse()?;
    make_step(
        pulse.amplitude_v,
        pulse.delay_s,
        pulse.duration_s,
        config.sample_rate_hz,
    )
    .map_err(|e| CliError::Config(format!("pulse: {e}")))
}

fn through_chain(model: Option<&DistortionModel>, input: &Signal) -> CliResult<Signal> {
    match model {
        Some(m) => apply_distortion(m, input).map_err(CliError::from),
        None => Ok(input.clone()),
    }
}

fn flux_waveform(params: &TransmonParams, voltage: &Signal) -> Signal {
    Signal::new(
        voltage
            .samples()
            .iter()
            .map(|v| voltage_to_flux(params, *v))
            .collect(),
        voltage.sample_rate(),
    )
    .expect("voltage waveform already validated")
}

fn fit_window(settings: &SynthesisSettings, len: usize) -> CliResult<std::ops::Range<usize>> {
    let end = settings.fit_window_end_index.unwrap_or(len).min(len);
    if settings.fit_window_start_index >= end {
        return Err(CliError::Config(format!(
            "fit window {}..{end} is empty",
            settings.fit_window_start_index
        )));
    }
    Ok(settings.fit_window_start_index..end)
}

fn print_model_warnings(ctx: &CommandContext, model: Option<&DistortionModel>) {
    if let Some(model) = model {
        for warning in model.table_range_warnings() {
            ctx.warn(&warning);
        }
    }
}

struct Reconstruction {
    phase: PhaseSeries,
    response: FluxResponse,
}

fn reconstruct_trace(
    trace: &CryoscopeTrace,
    params: &TransmonParams,
    baseline_flux: f64,
    normalization_start: usize,
) -> CliResult<Reconstruction> {
    let phase = extract_phase(trace);
    let detuning = phase_to_detuning(&phase)?;
    let start = normalization_start.min(detuning.len() - 1);
    let response =
        detuning_to_flux_response(&detuning, params, baseline_flux, start..detuning.len())?;
    Ok(Reconstruction { phase, response })
}

/// Simulate one Cryoscope experiment against a distorted voltage waveform
/// and reconstruct the normalized flux response.
#[allow(clippy::too_many_arguments)]
fn cryoscope_loop(
    params: &TransmonParams,
    coherence: &CoherenceParams,
    chain: Option<&DistortionModel>,
    predistorted_voltage: &Signal,
    durations: &[f64],
    noise_sd: f64,
    seed: u64,
    normalization_start: usize,
) -> CliResult<(CryoscopeTrace, Reconstruction)> {
    let distorted = through_chain(chain, predistorted_voltage)?;
    let waveform = flux_waveform(params, &distorted);
    let baseline = voltage_to_flux(params, 0.0);
    let trace = simulate_cryoscope(
        params,
        coherence,
        &waveform,
        baseline,
        durations,
        noise_sd,
        seed,
    )?;
    let reconstruction = reconstruct_trace(&trace, params, baseline, normalization_start)?;
    Ok((trace, reconstruction))
}

// ---------------------------------------------------------------------------
// simulate-distortion
// ---------------------------------------------------------------------------

pub fn cmd_simulate_distortion(config: &Config, ctx: &CommandContext) -> CliResult<()> {
    let models = config
        .distortions
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'distortions' list".into()))?;
    if models.is_empty() {
        return Err(CliError::Config("'distortions' list is empty".into()));
    }
    for labeled in models {
        if let Some(model) = &labeled.model {
            model
                .validate()
                .map_err(|e| CliError::Config(format!("model '{}': {e}", labeled.label)))?;
        }
    }
    let step = voltage_step(config)?;
    let shared = config.synthesis();

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    for labeled in models {
        let settings = labeled.synthesis.clone().unwrap_or_else(|| shared.clone());
        let model = labeled.model.as_ref();
        print_model_warnings(ctx, model);
        let distorted = through_chain(model, &step)?;
        let window = fit_window(&settings, step.len())?;
        let options = SearchOptions {
            fit_window: window,
            regularization: settings.ridge,
            allow_integrator_pole: settings.allow_integrator_pole,
        };
        let outcome = search_min_taps(
            &distorted,
            &step,
            settings.threshold_db,
            settings.max_feedback_taps,
            settings.max_feedforward_taps,
            &options,
        )?;
        if !outcome.met {
            ctx.warn(&format!(
                "model '{}': threshold {} dB not met (best {:.2} dB at M_a={}, M_b={})",
                labeled.label,
                settings.threshold_db,
                outcome.nmse_db,
                outcome.feedback_taps,
                outcome.feedforward_taps
            ));
        }
        let filter = &outcome.design.filter;
        let predistorted = apply_iir(&step, filter);
        let corrected = through_chain(model, &predistorted)?;
        let settle = settings
            .settle_index
            .unwrap_or_else(|| default_settle_index(&step));
        let report = evaluate_correction(model, filter, None, &step, settle)?;

        io::write_signal_csv(&stage.path(&format!("{}_distorted.csv", labeled.label)), &distorted)?;
        io::write_signal_csv(
            &stage.path(&format!("{}_predistorted.csv", labeled.label)),
            &predistorted,
        )?;
        io::write_signal_csv(&stage.path(&format!("{}_corrected.csv", labeled.label)), &corrected)?;
        write_json(
            &stage.path(&format!("{}_report.json", labeled.label)),
            &ModelReport {
                label: labeled.label.clone(),
                report,
                search: SearchSummary::from_outcome(&outcome, settings.threshold_db),
                provenance: Provenance::new(ctx),
            },
        )?;
        if ctx.verbose {
            eprintln!(
                "model '{}': M_a={}, M_b={}, nmse {:.2} dB",
                labeled.label, outcome.feedback_taps, outcome.feedforward_taps, outcome.nmse_db
            );
        }
    }
    stage.commit()
}

// ---------------------------------------------------------------------------
// cryoscope
// ---------------------------------------------------------------------------

pub fn cmd_cryoscope(config: &Config, ctx: &CommandContext) -> CliResult<()> {
    let params = config.require_transmon()?.build()?;
    let coherence = config.require_coherence()?.build()?;
    let sweep = config.require_tau_sweep()?;
    let durations = sweep.durations(config.sample_rate_hz)?;
    if sweep.stop_s > 2.0 * coherence.t2_star_s {
        ctx.warn(&format!(
            "tau sweep reaches {} s, beyond twice t2* = {} s; late points will have little contrast",
            sweep.stop_s, coherence.t2_star_s
        ));
    }
    if let Some(model) = &config.distortion {
        model.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    print_model_warnings(ctx, config.distortion.as_ref());
    for warning in params.warnings() {
        ctx.warn(&warning);
    }

    let step = voltage_step(config)?;
    let settings = config.synthesis();
    let (trace, reconstruction) = cryoscope_loop(
        &params,
        &coherence,
        config.distortion.as_ref(),
        &step,
        &durations,
        config.noise().readout_sd,
        ctx.seed(config),
        settings.normalization_start_index,
    )?;

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    io::write_trace_csv(&stage.path("cryoscope_trace.csv"), &trace)?;
    io::write_phase_csv(&stage.path("phase_series.csv"), &reconstruction.phase)?;
    stage.commit()
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

pub fn cmd_reconstruct(config: &Config, trace_path: &Path, ctx: &CommandContext) -> CliResult<()> {
    let params = config.require_transmon()?.build()?;
    let trace = io::read_trace_csv(trace_path)?;
    let baseline = voltage_to_flux(&params, 0.0);
    let settings = config.synthesis();
    let reconstruction =
        reconstruct_trace(&trace, &params, baseline, settings.normalization_start_index)?;
    if !reconstruction.phase.low_contrast().is_empty() {
        ctx.warn(&format!(
            "{} trace points fell below the phase-quality floor",
            reconstruction.phase.low_contrast().len()
        ));
    }

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    io::write_phase_csv(&stage.path("phase_series.csv"), &reconstruction.phase)?;
    io::write_flux_response_csv(&stage.path("flux_response.csv"), &reconstruction.response)?;
    stage.commit()
}

// ---------------------------------------------------------------------------
// simulate-spectroscopy
// ---------------------------------------------------------------------------

pub fn cmd_simulate_spectroscopy(config: &Config, ctx: &CommandContext) -> CliResult<()> {
    let params = config.require_transmon()?.build()?;
    let spec = config.require_spectroscopy()?;
    let voltages = spec.voltages_v.values("voltages_v")?;
    let probes = spec.probe_frequencies_hz.values("probe_frequencies_hz")?;
    let map = simulate_spectroscopy(
        &params,
        &voltages,
        &probes,
        spec.linewidth_hz,
        spec.contrast,
        config.noise().spectroscopy_sd,
        ctx.seed(config),
    )?;
    let mut stage = OutputStage::new(&ctx.out_dir)?;
    io::write_spectroscopy_csv(&stage.path("spectroscopy_map.csv"), &map)?;
    stage.commit()
}

// ---------------------------------------------------------------------------
// fit-spectroscopy
// ---------------------------------------------------------------------------

pub fn cmd_fit_spectroscopy(config: &Config, map_path: &Path, ctx: &CommandContext) -> CliResult<()> {
    let guess = match config.spectroscopy.as_ref().and_then(|s| s.initial_guess) {
        Some(g) => g.build()?,
        None => config.require_transmon()?.build()?,
    };
    let map = io::read_spectroscopy_csv(map_path)?;
    let extraction = extract_peaks(&map);
    if !extraction.skipped_columns.is_empty() {
        ctx.warn(&format!(
            "skipped {} voltage rows without a clear resonance dip",
            extraction.skipped_columns.len()
        ));
    }
    let fit = fit_spectroscopy(&extraction.points, &guess)?;
    if ctx.verbose {
        eprintln!(
            "fit: ec {} Hz, ej {} Hz in {} iterations (rms {} Hz)",
            fit.params.ec_hz, fit.params.ej_hz, fit.iterations, fit.rms_residual_hz
        );
    }

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    io::write_peaks_csv(&stage.path("peaks.csv"), &extraction.points)?;
    write_json(
        &stage.path("fit_report.json"),
        &FitReport {
            ec_hz: fit.params.ec_hz,
            ej_hz: fit.params.ej_hz,
            flux_per_volt: fit.params.flux_per_volt,
            flux_offset: fit.params.flux_offset,
            rms_residual_hz: fit.rms_residual_hz,
            iterations: fit.iterations,
            points_used: extraction.points.len(),
            skipped_columns: extraction.skipped_columns.clone(),
            provenance: Provenance::new(ctx),
        },
    )?;
    stage.commit()
}

// ---------------------------------------------------------------------------
// design-dpd
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct DesignedFilters {
    pub iir: IirFilterSpec,
    pub fir: FirTaps,
}

pub fn cmd_design_dpd(config: &Config, measured_path: &Path, ctx: &CommandContext) -> CliResult<()> {
    let measured = io::read_signal_csv(measured_path)?;
    let settings = config.synthesis();
    let target = Signal::new(vec![1.0; measured.len()], measured.sample_rate())
        .expect("constant target is valid");
    let window = fit_window(&settings, measured.len())?;
    let options = SearchOptions {
        fit_window: window.clone(),
        regularization: settings.ridge,
        allow_integrator_pole: settings.allow_integrator_pole,
    };
    let outcome = search_min_taps(
        &measured,
        &target,
        settings.threshold_db,
        settings.max_feedback_taps,
        settings.max_feedforward_taps,
        &options,
    )?;
    if !outcome.met {
        ctx.warn(&format!(
            "threshold {} dB not met (best {:.2} dB)",
            settings.threshold_db, outcome.nmse_db
        ));
    }
    let corrected = apply_iir(&measured, &outcome.design.filter);
    let fir = design_residual_fir(&corrected, &target, settings.fir_length, window)?;

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    write_json(
        &stage.path("dpd_filters.json"),
        &DesignedFilters {
            iir: outcome.design.filter.clone(),
            fir,
        },
    )?;
    write_json(
        &stage.path("design_report.json"),
        &SearchSummary::from_outcome(&outcome, settings.threshold_db),
    )?;
    stage.commit()
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

pub fn cmd_calibrate(config: &Config, ctx: &CommandContext) -> CliResult<()> {
    let params = config.require_transmon()?.build()?;
    let coherence = config.require_coherence()?.build()?;
    let pulse = config.require_pulse()?;
    if pulse.delay_s != 0.0 {
        return Err(CliError::Config(
            "calibrate expects a zero-delay flux pulse (the tau sweep starts at the edge)".into(),
        ));
    }
    let sweep = config.require_tau_sweep()?;
    let fs = config.sample_rate_hz;
    if (sweep.step_s * fs - 1.0).abs() > 1e-9 {
        return Err(CliError::Config(format!(
            "calibrate requires the tau step to equal the sample period (step {} s at {} Sa/s); \
             the DPD filters run at the generator rate",
            sweep.step_s, fs
        )));
    }
    let durations = sweep.durations(fs)?;
    let n_tau = durations.len();
    if let Some(model) = &config.distortion {
        model.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    print_model_warnings(ctx, config.distortion.as_ref());
    let chain = config.distortion.as_ref();
    let settings = config.synthesis();
    let noise = config.noise();
    let seed = ctx.seed(config);

    // The pulse must span every snapped duration index.
    let max_index = (sweep.stop_s * fs).round() as usize;
    let span_s = (max_index + 2) as f64 / fs;
    if pulse.duration_s < span_s {
        return Err(CliError::Config(format!(
            "pulse duration {} s is shorter than the tau sweep span {span_s} s",
            pulse.duration_s
        )));
    }
    let vstep = make_step(pulse.amplitude_v, 0.0, pulse.duration_s, fs)
        .map_err(|e| CliError::Config(format!("pulse: {e}")))?;

    // Measure the uncorrected chain once.
    let (_, recon0) = cryoscope_loop(
        &params,
        &coherence,
        chain,
        &vstep,
        &durations,
        noise.readout_sd,
        seed,
        settings.normalization_start_index,
    )?;

    // Design the IIR stage on the reconstructed normalized response.
    let measured0 = recon0.response.normalized_signal(fs)?;
    let target = Signal::new(vec![1.0; n_tau], fs).expect("constant target");
    let window = fit_window(&settings, n_tau)?;
    let options = SearchOptions {
        fit_window: window.clone(),
        regularization: settings.ridge,
        allow_integrator_pole: settings.allow_integrator_pole,
    };
    let outcome = search_min_taps(
        &measured0,
        &target,
        settings.threshold_db,
        settings.max_feedback_taps,
        settings.max_feedforward_taps,
        &options,
    )?;
    if !outcome.met {
        ctx.warn(&format!(
            "IIR search missed the {} dB threshold (best {:.2} dB at M_a={}, M_b={})",
            settings.threshold_db, outcome.nmse_db, outcome.feedback_taps, outcome.feedforward_taps
        ));
    }
    let iir = outcome.design.filter.clone();

    // The corrected responses are predicted by filtering the measured data
    // (predistortion commutes with an LTI chain). Re-measuring the spiky
    // predistorted pulse would alias the Ramsey phase: its edge transient
    // swings the flux beyond the inversion band.
    let corrected_iir = apply_iir(&measured0, &iir);
    let fir = design_residual_fir(&corrected_iir, &target, settings.fir_length, window)?;
    let corrected_fir = apply_fir(&corrected_iir, &fir);

    // Exact-chain evaluation of the designed filters.
    let test_step = Signal::new(vec![1.0; n_tau], fs).expect("unit step");
    let settle = settings
        .settle_index
        .unwrap_or_else(|| default_settle_index(&test_step));
    let report = evaluate_correction(chain, &iir, Some(&fir), &test_step, settle)?;
    if ctx.verbose {
        eprintln!(
            "calibrate: M_a={}, M_b={}, fir {} taps, dev_iir {:.3e}, dev_fir {:.3e}",
            report.m_a,
            report.m_b,
            fir.len(),
            report.max_dev_iir,
            report.max_dev_fir.unwrap_or(f64::NAN)
        );
    }

    // Raw-flux columns for the predicted curves reuse the measured
    // normalization scale.
    let norm_idx = settings.normalization_start_index.min(n_tau - 1);
    let mean_raw = recon0.response.raw_flux_phi0()[norm_idx]
        / recon0.response.normalized()[norm_idx];
    let predicted = |normalized: &Signal| -> CliResult<FluxResponse> {
        FluxResponse::from_columns(
            recon0.response.times_s().to_vec(),
            normalized.samples().iter().map(|v| v * mean_raw).collect(),
            normalized.samples().to_vec(),
        )
        .map_err(CliError::from)
    };
    let iir_curve = predicted(&corrected_iir)?;
    let fir_curve = predicted(&corrected_fir)?;

    let mut stage = OutputStage::new(&ctx.out_dir)?;
    io::write_flux_response_csv(&stage.path("flux_uncorrected.csv"), &recon0.response)?;
    io::write_flux_response_csv(&stage.path("flux_iir.csv"), &iir_curve)?;
    io::write_flux_response_csv(&stage.path("flux_iir_fir.csv"), &fir_curve)?;
    write_json(
        &stage.path("calibration.json"),
        &CalibrationResult {
            iir,
            fir,
            report,
            search: SearchSummary::from_outcome(&outcome, settings.threshold_db),
            settle_index: settle,
            provenance: Provenance::new(ctx),
        },
    )?;
    stage.commit()
}
