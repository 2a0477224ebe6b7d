//! `relay`: runs the computations of the `hysteretic-relay` library from a TOML
//! configuration and writes figure-ready CSV and JSON files.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::commands::Output;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "relay", version = env!("RELAY_BUILD_ID"), about = "Delayed hysteretic relay oscillator: simulation, collision surfaces, continuation and attractors")]
struct Cli {
    /// TOML configuration; missing keys take the defaults shown below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized inputs; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the delayed relay system: trajectory.csv and events.json.
    Simulate,
    /// Sample the positive-ε collision surface: surface.csv.
    Surface,
    /// Bifurcation curves of the colliding orbit on the surface: curves.csv, special.csv, bifmap.json.
    Bifmap,
    /// Locate the NSC point and export the Neimark–Sacker and collision curves at fixed ε.
    Unfold,
    /// Continue the family of invariant curves colliding with the switching line.
    Family,
    /// Attractor envelopes of the return map along a line in α: sweep.csv, samples.csv.
    Sweep,
    /// Iterate the return map onto an invariant polygon: polygon.csv, polygon.json.
    Polygon,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::PrintConfig = cli.command {
        print!("{}", config.to_toml());
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = Output::prepare(&cli.out)?;
    match cli.command {
        Command::Simulate => commands::simulate(&config, out),
        Command::Surface => commands::surface(&config, out),
        Command::Bifmap => commands::bifmap(&config, out),
        Command::Unfold => commands::unfold(&config, out),
        Command::Family => commands::family(&config, out),
        Command::Sweep => commands::sweep_cmd(&config, out),
        Command::Polygon => commands::polygon(&config, out),
        Command::PrintConfig => unreachable!(),
    }
}

fn main() -> ExitCode {
    let defaults = format!("Default configuration:\n\n{}", RunConfig::default().to_toml());
    let matches = Cli::command().after_long_help(defaults).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relay: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
