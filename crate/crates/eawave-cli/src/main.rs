//! `eawave`: command-line driver for the coupled elasto-acoustic solver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eawave_cli::commands;
use eawave_cli::config::ConfigDoc;
use eawave_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "eawave",
    about = "2D coupled elasto-acoustic wave solver (HHO/dG space discretization, Runge-Kutta time integration)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and field dumps.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Size of the worker thread pool (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write a field dump every N steps (simulate only).
    #[arg(long, global = true)]
    dump_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write energy/sensor traces.
    Simulate,
    /// Run an error-versus-refinement study on a manufactured solution.
    Convergence,
    /// Sweep stabilization weights and report spectral radii.
    Spectral,
    /// Print statistics of the configured mesh.
    MeshInfo,
}

fn load_config(cli: &Cli) -> Result<ConfigDoc, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".to_string()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ConfigDoc::parse(&text)?)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let doc = load_config(cli)?;
    match cli.command {
        Command::Simulate => commands::simulate::run(&doc, &cli.out, cli.dump_every),
        Command::Convergence => commands::convergence::run(&doc, &cli.out),
        Command::Spectral => commands::spectral::run(&doc, &cli.out),
        Command::MeshInfo => commands::meshinfo::run(&doc),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eawave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
