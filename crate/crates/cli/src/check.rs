use anyhow::Result;
use cleanse_core::check::{run_checks, CheckConfig};
use cleanse_core::count::count_log_pmf;

#[derive(clap::Args)]
pub struct Args {
    /// Random probability vectors compared against enumeration.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Largest vector length enumerated exhaustively.
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    /// Random instances per gradient check.
    #[arg(long, default_value_t = 50)]
    gradient_instances: usize,
    /// Length of the underflow stress vectors.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Returns whether every check passed.
pub fn run(args: &Args) -> Result<bool> {
    let cfg = CheckConfig {
        trials: args.trials,
        max_n: args.max_n,
        gradient_instances: args.gradient_instances,
        stress_n: args.n,
        seed: args.seed,
    };
    let outcomes = run_checks(&cfg, count_log_pmf);
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    for o in &outcomes {
        println!(
            "{:<width$}  max_deviation={:.3e}  tolerance={:.0e}  {}",
            o.name,
            o.max_deviation,
            o.tolerance,
            if o.passed() { "PASS" } else { "FAIL" }
        );
    }
    Ok(outcomes.iter().all(|o| o.passed()))
}
