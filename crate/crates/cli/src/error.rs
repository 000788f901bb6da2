//! Command-line error type with the scriptable exit-code map:
//! 0 success, 2 config error, 3 reconstruction range error, 4 fit
//! divergence, 5 identifiability, 1 anything else.

use fluxdpd::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    ReconstructionRange(String),
    FitDivergence(String),
    Identifiability(String),
    Other(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::ReconstructionRange(_) => 3,
            CliError::FitDivergence(_) => 4,
            CliError::Identifiability(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::ReconstructionRange(m) => write!(f, "reconstruction range error: {m}"),
            CliError::FitDivergence(m) => write!(f, "fit divergence: {m}"),
            CliError::Identifiability(m) => write!(f, "identifiability error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Map a pipeline-phase core error onto the exit-code categories.
impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::OutOfBand { .. } => CliError::ReconstructionRange(err.to_string()),
            CoreError::FitDiverged { .. } => CliError::FitDivergence(err.to_string()),
            CoreError::Identifiability(_) => CliError::Identifiability(err.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {err}"))
    }
}
