use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "fermi",
    version,
    about = "Classical and quantum simulations of the atom-optics Fermi accelerator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Overrides the seed of every random draw in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert laboratory parameters to reduced units.
    Convert,
    /// Propagate a classical Gaussian ensemble.
    Classical,
    /// Propagate a quantum wavepacket.
    Quantum,
    /// Maximal Lyapunov exponents for a list of initial conditions.
    Lyapunov,
    /// Stroboscopic sections of single trajectories.
    Poincare,
    /// Momentum diffusion of the standard map.
    Map(commands::MapArgs),
    /// Fit distributions and derive scales from existing CSV outputs.
    Analyze(commands::AnalyzeArgs),
    /// Run a named preset.
    Experiment(commands::ExperimentArgs),
    /// Final widths and profile verdicts over a range of modulation strengths.
    Sweep(commands::SweepArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let g = &cli.global;
    let result = match cli.command {
        Command::Convert => commands::convert(g),
        Command::Classical => commands::classical(g),
        Command::Quantum => commands::quantum(g),
        Command::Lyapunov => commands::lyapunov(g),
        Command::Poincare => commands::poincare(g),
        Command::Map(a) => commands::map(g, &a),
        Command::Analyze(a) => commands::analyze(g, &a),
        Command::Experiment(a) => commands::experiment(g, &a),
        Command::Sweep(a) => commands::sweep(g, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
