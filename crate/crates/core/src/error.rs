//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by signal, model, synthesis, and reconstruction operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two signals that must share a length (and sample rate) do not.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A model was discretized below its minimum usable sample rate.
    #[error("sample rate {got_hz} Hz is below the required minimum {required_hz} Hz for this model")]
    Undersampled { required_hz: f64, got_hz: f64 },

    /// The least-squares design matrix is rank deficient.
    #[error("singular design system over window {window_start}..{window_end}: {detail}")]
    SingularSystem {
        window_start: usize,
        window_end: usize,
        detail: String,
    },

    /// A frequency fell outside the attainable transmon band.
    #[error("frequency {frequency_hz} Hz at sample {index} is outside the attainable band [{min_hz}, {max_hz}] Hz")]
    OutOfBand {
        index: usize,
        frequency_hz: f64,
        min_hz: f64,
        max_hz: f64,
    },

    /// The nonlinear fit stopped without meeting its convergence criteria.
    /// Carries the best parameters found so far.
    #[error("fit did not converge after {iterations} iterations (rms residual {rms_residual_hz} Hz)")]
    FitDiverged {
        iterations: usize,
        ec_hz: f64,
        ej_hz: f64,
        flux_per_volt: f64,
        flux_offset: f64,
        rms_residual_hz: f64,
    },

    /// The data cannot determine the fit parameters.
    #[error("unidentifiable fit problem: {0}")]
    Identifiability(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A data file did not match its expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
