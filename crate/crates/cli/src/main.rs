//! `cleanse`: generate partial-label data, train, run the oracle checks and
//! compare algorithms by rank.

mod check;
mod generate;
mod stats;
mod train;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cleanse",
    version,
    about = "Partial-label learning with k-NN reweighting and a count loss"
)]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a partial-label dataset.
    Generate(generate::Args),
    /// Print summary statistics of a partial-label file.
    Describe(generate::DescribeArgs),
    /// Train a classifier and write metrics, checkpoint and manifest.
    Train(Box<train::Args>),
    /// Friedman test and Bonferroni-Dunn critical difference.
    Stats(stats::Args),
    /// Compare the count-loss code against brute-force oracles.
    #[command(alias = "countloss-check")]
    Check(check::Args),
}

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Some check exceeded its tolerance.
    Check,
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let io = err.chain().any(|cause| {
            cause.is::<std::io::Error>()
                || cause.is::<serde_json::Error>()
                || matches!(
                    cause.downcast_ref::<cleanse_core::Error>(),
                    Some(cleanse_core::Error::Io(_) | cleanse_core::Error::Parse { .. })
                )
        });
        if io {
            Failure::Io(err)
        } else {
            Failure::Usage(err)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(args) => generate::run(&args)?,
        Command::Describe(args) => generate::describe(&args)?,
        Command::Train(args) => train::run(&args)?,
        Command::Stats(args) => stats::run(&args)?,
        Command::Check(args) => {
            if !check::run(&args)? {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Check => eprintln!("error: one or more checks failed"),
                Failure::Usage(e) | Failure::Io(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(failure.code())
        }
    }
}
