use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlmm_cli::commands;
use qlmm_cli::config::OracleModeKind;

const CONFIG_HELP: &str = "\
CONFIG FILE (TOML):
  [ivp]        kind = \"spring_mass_damper\" | \"ballistic\" | \"linear_system\"
               t0, tf                 time window
               deriv_upper/_lower     per-dimension derivative bounds over all candidates
               mass (1.0), spring (40.0)            spring_mass_damper
               speed, gravity (9.8)                 ballistic
               matrix, x0, entry = [row, col]       linear_system (entry is swept)
  [sweep]      parameter (label), min, max, count: uniform closed grid of candidates
  [optimize]   epsilon (error budget), objective = \"min_qubits\" | \"min_depth\" |
               \"min_depth_under_qubit_cap\" (needs qubit_cap), k_range = [2, 3],
               deriv_bound (per-dim bound on the (p+1)-th solution derivative),
               h_cap (optional), node_limit (1000000)
  [box]        mantissa, exponent, margin, a0, steps: inclusive [min, max] ranges
  [oracle]     mode = \"final-time\" (default) | \"all-steps\", objective_dim (0),
               crossing_dim (1), maximize (false)
  [cost_model] depth_per_mantissa_bit (1), depth_per_exponent_bit (1),
               depth_per_consumed_ancilla (1), depth_constant (10),
               workspace_per_value_bit (2)
  [tradeoff]   caps = [..] qubit caps (derived from the extremes when absent)
  seed         search seed (0), overridden by --seed

EXIT CODES: 0 ok, 1 runtime/IO, 2 infeasible, 3 config error,
            4 margin exhausted mid-run, 5 no feasible oracle candidate.";

#[derive(Parser)]
#[command(
    name = "qlmm",
    version,
    about = "Synthesize, bit-exactly simulate and search multistep integrator schemes",
    after_long_help = CONFIG_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the cheapest feasible scheme and write scheme.toml + reports.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run all candidates bit-exactly; write trajectory CSVs + error stats.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Scheme file produced by `optimize` (or written by hand).
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for the candidate sweep (1 = sequential).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Threshold-search the sweep for the optimal candidate.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        /// Oracle mode override: final or all-steps.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<OracleModeKind>,
        /// Search seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Tabulate qubits vs depth across objective variants.
    Tradeoff {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<OracleModeKind, String> {
    match s {
        "final" | "final-time" => Ok(OracleModeKind::FinalTime),
        "all-steps" => Ok(OracleModeKind::AllSteps),
        other => Err(format!("unknown mode `{other}` (expected final or all-steps)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize { config, out } => commands::cmd_optimize(&config, &out),
        Command::Run { config, scheme, out, jobs } => commands::cmd_run(&config, &scheme, &out, jobs),
        Command::Search { config, scheme, mode, seed, out, jobs } => {
            commands::cmd_search(&config, &scheme, mode, seed, &out, jobs)
        }
        Command::Tradeoff { config, out } => commands::cmd_tradeoff(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
