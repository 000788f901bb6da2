//! `fluxdpd` — flux-line distortion simulation, Cryoscope reconstruction,
//! and DPD filter synthesis from a single JSON config.

mod commands;
mod config;
mod error;
mod stage;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::CommandContext;
use config::Config;
use error::CliResult;

#[derive(Parser)]
#[command(name = "fluxdpd", version, about = "Flux-control distortion characterization and digital predistortion pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config's noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print per-stage diagnostics to stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Distort, predistort, and correct a step for each configured model.
    SimulateDistortion {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate a Ramsey-style trace against the configured distortion chain.
    Cryoscope {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reconstruct the flux response from a measured trace CSV.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Cryoscope trace CSV (tau_s,p_x,p_y).
        #[arg(long)]
        trace: PathBuf,
    },
    /// Generate a 2D flux spectroscopy map.
    SimulateSpectroscopy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Extract resonances from a map CSV and fit the flux-frequency relation.
    FitSpectroscopy {
        #[arg(long)]
        config: PathBuf,
        /// Spectroscopy map CSV.
        #[arg(long)]
        map: PathBuf,
    },
    /// Design IIR + FIR correction filters from a measured step-response CSV.
    DesignDpd {
        #[arg(long)]
        config: PathBuf,
        /// Measured (normalized) step response CSV.
        #[arg(long)]
        measured: PathBuf,
    },
    /// Full loop: simulate, reconstruct, synthesize both stages, verify.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(cli: &Cli, path: &PathBuf) -> CliResult<(Config, CommandContext)> {
    let (config, bytes) = Config::load(path)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = CommandContext {
        out_dir,
        seed_override: cli.seed,
        verbose: cli.verbose,
        config_sha256: format!("{:x}", Sha256::digest(&bytes)),
    };
    Ok((config, ctx))
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::SimulateDistortion { config } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_simulate_distortion(&config, &ctx)
        }
        Command::Cryoscope { config } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_cryoscope(&config, &ctx)
        }
        Command::Reconstruct { config, trace } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_reconstruct(&config, trace, &ctx)
        }
        Command::SimulateSpectroscopy { config } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_simulate_spectroscopy(&config, &ctx)
        }
        Command::FitSpectroscopy { config, map } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_fit_spectroscopy(&config, map, &ctx)
        }
        Command::DesignDpd { config, measured } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_design_dpd(&config, measured, &ctx)
        }
        Command::Calibrate { config } => {
            let (config, ctx) = load(cli, config)?;
            commands::cmd_calibrate(&config, &ctx)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
