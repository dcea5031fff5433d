//! Batch front-end for the spin-orbit entanglement simulator: configures
//! and runs the experiments, analyzes count data, and exports figure data.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// CLI failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

/// Machine-readable report encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Field-map output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapsFormat {
    Csv,
    Png,
    Both,
}

#[derive(Parser)]
#[command(name = "spinorbit", version, about = "Spin-orbit photon entanglement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate coincidence counts over the configured (theta, chi) grid
    Simulate(SimulateArgs),
    /// Evaluate the CHSH S(chi) scan from a counts CSV
    Chsh(ChshArgs),
    /// Fit fringes per polarizer angle from a counts CSV
    Fringes(FringesArgs),
    /// Render transverse field and Stokes maps for a configured mode
    Render(RenderArgs),
    /// Run all three experiments with standard settings and emit all
    /// figure-data files
    ReproducePaper(ReproduceArgs),
}

#[derive(clap::Args)]
pub struct SimulateArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
}

#[derive(clap::Args)]
pub struct ChshArgs {
    /// Counts CSV produced by `simulate`
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// First polarizer angle, degrees
    #[arg(long, default_value_t = 0.0)]
    pub theta_deg: f64,
    /// Second polarizer angle, degrees
    #[arg(long, default_value_t = 45.0)]
    pub theta_prime_deg: f64,
    /// Offset chi' - chi, degrees
    #[arg(long, default_value_t = 22.5)]
    pub chi_offset_deg: f64,
}

#[derive(clap::Args)]
pub struct FringesArgs {
    /// Counts CSV produced by `simulate`
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
}

#[derive(clap::Args)]
pub struct RenderArgs {
    /// Configuration with a [render] section (TOML)
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Which map encodings to write
    #[arg(long, value_enum, default_value_t = MapsFormat::Both)]
    pub maps_format: MapsFormat,
}

#[derive(clap::Args)]
pub struct ReproduceArgs {
    /// Output directory for all figure data
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed (default 42)
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Chsh(args) => commands::cmd_chsh(&args),
        Command::Fringes(args) => commands::cmd_fringes(&args),
        Command::Render(args) => commands::cmd_render(&args),
        Command::ReproducePaper(args) => commands::cmd_reproduce(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
