//! Benchmark CLI: `run` executes a fold-repeated experiment and writes the
//! per-fold CSV, `table` aggregates an emitted CSV, `bo` runs the
//! Bayesian-optimization comparison.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime failure.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use genopt::bench::{load_config, run_bo_experiment, run_experiment, table_from_csv, BenchError};

#[derive(Parser)]
#[command(name = "opt-bench", about = "Global-optimization benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fold-repeated experiment and write the per-fold CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the fold count from the config.
        #[arg(long)]
        folds: Option<u64>,
    },
    /// Print the aggregated regret table for an emitted CSV.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the Bayesian-optimization comparison and write its CSV.
    Bo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("opt-bench: {e}");
            match e {
                BenchError::UnknownKey { .. }
                | BenchError::BadValue { .. }
                | BenchError::Validation(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            folds,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = folds {
                cfg.folds = f;
            }
            cfg.validate()?;
            let mut w = BufWriter::new(File::create(&out)?);
            let table = run_experiment(&cfg, &mut w)?;
            print!("{table}");
            Ok(())
        }
        Command::Table { input } => {
            let text = std::fs::read_to_string(&input)?;
            let table = table_from_csv(&text)?;
            print!("{table}");
            Ok(())
        }
        Command::Bo { config, out } => {
            let cfg = load_config(&config)?;
            let mut w = BufWriter::new(File::create(&out)?);
            run_bo_experiment(&cfg, &mut w)
        }
    }
}
