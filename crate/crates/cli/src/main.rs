use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evogame::games::UpdateRule;
use evogame::Error;

mod cancer;
mod classify;
mod coalesce;
mod figures;
mod output;
mod replicator;
mod selftest;
mod simulate;

#[derive(Parser)]
#[command(name = "evogame", version, about = "Spatial evolutionary games under weak selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coalescing random walk constants and identities for a kernel.
    Coalesce(coalesce::Args),
    /// Classify a 2- or 3-strategy game, or sweep an (S, T) grid.
    Classify(classify::Args),
    /// Replicator dynamics: integration, equilibria, Lyapunov and repelling functions.
    Replicator(replicator::Args),
    /// Case analysis of the cancer games.
    Cancer(cancer::Args),
    /// Run the lattice simulator.
    Simulate(simulate::SimArgs),
    /// Solve the reaction-diffusion limit in one dimension.
    Pde(simulate::PdeArgs),
    /// Phase-diagram grids for plotting.
    Figures(figures::Args),
    /// Validate every preset and run quick consistency checks.
    Selftest(selftest::Args),
}

/// Shared `--update` / `--constants` pair.
#[derive(clap::Args, Clone)]
pub struct Spatial {
    /// Update rule: bd or db.
    #[arg(long, default_value = "bd")]
    pub update: UpdateRule,
    /// Coalescence constants: preset:NAME or a JSON/TOML file.
    #[arg(long, default_value = "preset:paper-3d-nn")]
    pub constants: String,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("EVOGAME_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Invalid(format!("EVOGAME_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Invalid(format!("cannot size the thread pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match cli.command {
        Command::Coalesce(a) => coalesce::run(a),
        Command::Classify(a) => classify::run(a),
        Command::Replicator(a) => replicator::run(a),
        Command::Cancer(a) => cancer::run(a),
        Command::Simulate(a) => simulate::run_lattice(a),
        Command::Pde(a) => simulate::run_pde(a),
        Command::Figures(a) => figures::run(a),
        Command::Selftest(a) => selftest::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evogame: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
