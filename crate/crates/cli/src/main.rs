use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use quasilattice::{run, Command, ExperimentConfig, RunOptions};

/// Quasi-lattice gas experiments.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    command: Command,
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate KS series above the convergence radius.
    #[arg(long)]
    override_radius: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        out: args.out,
        seed: args.seed,
        override_radius: args.override_radius,
        threads: args.threads,
    };
    let result =
        ExperimentConfig::from_path(&args.config).and_then(|cfg| run(args.command, &cfg, &opts));
    match result {
        Ok(o) => {
            println!(
                "{}: {} checks, {} failed",
                o.csv.display(),
                o.checks,
                o.failures
            );
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
