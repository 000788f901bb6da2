//! Closed-loop checks pairing the forward simulators with the analysis side:
//! the reconstruction pipeline must reproduce what the simulator was fed.

use fluxdpd::distortion::{apply_distortion, DistortionModel};
use fluxdpd::reconstruction::{detuning_to_flux_response, extract_phase, phase_to_detuning};
use fluxdpd::signal::{make_step, Signal};
use fluxdpd::transmon::{
    accumulated_phases, flux_to_frequency, frequency_to_flux, simulate_cryoscope,
    CoherenceParams, TransmonParams,
};

const FS: f64 = 2.4e9;

fn transmon() -> TransmonParams {
    TransmonParams::new(0.2e9, 15e9, 0.1, 0.0).unwrap()
}

/// Overshoot-distorted flux waveform riding on a baseline.
fn overshoot_waveform(baseline: f64, delta: f64, n: usize) -> (DistortionModel, Signal) {
    let model = DistortionModel::ExponentialOvershoot {
        amplitude: 0.1,
        time_constant: 10e-9,
    };
    let step = make_step(1.0, 0.0, n as f64 / FS, FS).unwrap();
    let shape = apply_distortion(&model, &step).unwrap();
    let wave = Signal::new(
        shape.samples().iter().map(|s| baseline + delta * s).collect(),
        FS,
    )
    .unwrap();
    (model, wave)
}

#[test]
fn extracted_phase_matches_simulator_phase() {
    let params = transmon();
    let (_, wave) = overshoot_waveform(0.30, 0.04, 1250);
    // T2* at 100x the longest duration keeps contrast near unity.
    let coherence = CoherenceParams::new(5e-5, 5e-5).unwrap();
    let durations: Vec<f64> = (0..1200).map(|k| k as f64 / FS).collect();
    let trace =
        simulate_cryoscope(&params, &coherence, &wave, 0.30, &durations, 0.0, 0).unwrap();
    let series = extract_phase(&trace);
    let internal = accumulated_phases(&params, &wave, 0.30, &durations).unwrap();
    for (k, (got, want)) in series.phase_rad().iter().zip(&internal).enumerate() {
        assert!(
            (got - want).abs() < 1e-6,
            "phase mismatch at point {k}: {got} vs {want}"
        );
    }
}

#[test]
fn cryoscope_reconstruction_reproduces_the_flux_waveform() {
    let params = transmon();
    let (_, wave) = overshoot_waveform(0.30, 0.04, 1250);
    let coherence = CoherenceParams::new(21.5e-6, 4.9e-6).unwrap();
    let durations: Vec<f64> = (0..1200).map(|k| k as f64 / FS).collect();
    let trace =
        simulate_cryoscope(&params, &coherence, &wave, 0.30, &durations, 0.0, 0).unwrap();
    let detuning = phase_to_detuning(&extract_phase(&trace)).unwrap();
    let response =
        detuning_to_flux_response(&detuning, &params, 0.30, 1..detuning.len()).unwrap();

    // Oracle: the true waveform normalized over the same window.
    let truth: Vec<f64> = wave.samples()[..durations.len()].to_vec();
    let mean = truth[1..].iter().sum::<f64>() / (truth.len() - 1) as f64;
    let mut worst = 0.0f64;
    for (got, want) in response.normalized()[1..].iter().zip(&truth[1..]) {
        worst = worst.max((got - want / mean).abs());
    }
    assert!(worst < 1e-3, "normalized flux error {worst}");
}

#[test]
fn exact_detuning_round_trip_through_the_frequency_map() {
    let params = transmon();
    let f_base = flux_to_frequency(&params, 0.2);
    let flux: Vec<f64> = (0..500)
        .map(|k| 0.2 + 0.2 * ((k as f64 / 120.0).sin().abs()))
        .collect();
    let detuning: Vec<f64> = flux
        .iter()
        .map(|phi| flux_to_frequency(&params, *phi) - f_base)
        .collect();
    let detuning = Signal::new(detuning, FS).unwrap();
    let response = detuning_to_flux_response(&detuning, &params, 0.2, 1..500).unwrap();
    for (got, want) in response.raw_flux_phi0().iter().zip(&flux) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
    // Round trip of the inverse map itself.
    for k in 0..500 {
        let phi = 0.5 * k as f64 / 499.0;
        let back = frequency_to_flux(&params, flux_to_frequency(&params, phi)).unwrap();
        assert!((back - phi).abs() < 1e-12);
    }
}
