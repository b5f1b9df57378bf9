mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Axis, Options};

#[derive(Parser)]
#[command(name = "decopt", version, about = "Decentralized optimization experiments under a synchronous time model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory; overrides `out` in the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; overrides `seed` in the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, tau) pair of a config
    Run { config: PathBuf },
    /// Sweep IDEAL over the regularization or the inner budget
    Ablate {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated: multiples of the default rho, or inner iteration counts
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Momentum of the inner AGD solver
        #[arg(long)]
        inner_beta: Option<f64>,
    },
    /// Check a mixing matrix: `cycle:8`, `edges:graph.txt` or `matrix:w.txt`
    Validate { source: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        out: cli.out,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let result = match &cli.command {
        Command::Run { config } => commands::cmd_run(config, &opts).map(|r| r.failed == 0),
        Command::Ablate {
            config,
            axis,
            values,
            inner_beta,
        } => commands::cmd_ablate(config, *axis, values, *inner_beta, &opts).map(|r| r.failed == 0),
        Command::Validate { source } => commands::cmd_validate(source),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
