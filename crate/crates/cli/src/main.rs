//! Command-line front end: instance ingestion, subcommand dispatch, seeded
//! reproducibility, and JSON/CSV emission.
//!
//! Exit codes: 0 success, 1 scientific check failure (a reported violation),
//! 2 input or usage error. Numbers are emitted in nats by default; `--bits`
//! renames every `*_nats` field to `*_bits` and converts the value.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "extremal", version, about = "Extremal entropy optimization toolkit")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Clone)]
struct RunArgs {
    /// RNG seed; falls back to EXTREMAL_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout (.csv selects CSV where supported).
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Emit bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Tolerance overrides as KEY=VAL (also accepted as --tol.KEY=VAL).
    /// Keys: kkt, quad, quad2d, check.
    #[arg(long = "tol", global = true, value_name = "KEY=VAL")]
    tol: Vec<String>,
    /// Worker threads: an integer, "seq", or "auto".
    #[arg(long, global = true, default_value = "auto")]
    parallelism: String,
    /// Sweep points for bc-region.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Candidate battery name for verify-extremal.
    #[arg(long, global = true, default_value = "std")]
    battery: String,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Gaussian-restricted extremal program and certify KKT.
    Solve {
        #[arg(long)]
        instance: std::path::PathBuf,
    },
    /// Enhance the noise covariances of a solved instance and run the
    /// ordering/proportionality/value-equality checks.
    Enhance {
        #[arg(long)]
        instance: std::path::PathBuf,
        #[arg(long)]
        solution: std::path::PathBuf,
    },
    /// Run the candidate battery against the certified Gaussian optimum.
    VerifyExtremal {
        #[arg(long)]
        instance: std::path::PathBuf,
    },
    /// Trace the covariance-preserving path and check monotonicity plus the
    /// Fisher-trace derivative formula.
    PathCheck {
        #[arg(long)]
        instance: std::path::PathBuf,
        /// Optional mixture JSON overriding the standard start.
        #[arg(long)]
        start: Option<std::path::PathBuf>,
    },
    /// Construct a strict non-Gaussian witness in the reversed-degraded
    /// regime.
    Counterexample {
        #[arg(long)]
        spec: std::path::PathBuf,
    },
    /// Sweep the broadcast-channel capacity region boundary (CSV).
    BcRegion {
        #[arg(long)]
        instance: std::path::PathBuf,
    },
    /// Distributed-source-coding weighted rate bound with bite detection.
    DscBound {
        #[arg(long)]
        instance: std::path::PathBuf,
        #[arg(long, default_value_t = 1.0)]
        mu1: f64,
        #[arg(long, default_value_t = 1.0)]
        mu2: f64,
    },
    /// Matrix Fisher information inequality check.
    FiiCheck {
        #[arg(long)]
        spec: std::path::PathBuf,
    },
    /// Cramér-Rao check for a mixture distribution.
    CrbCheck {
        #[arg(long)]
        dist: std::path::PathBuf,
    },
    /// de Bruijn identity check (entropy derivative vs Fisher trace).
    DebruijnCheck {
        #[arg(long)]
        spec: std::path::PathBuf,
    },
    /// Differential entropy estimation for a distribution or sample file.
    EntropyEst {
        /// Mixture JSON ({"weights":..,"means":..,"covs":..}) or
        /// {"uniform":{"half_width":..,"sigma2":..}}.
        #[arg(long)]
        dist: Option<std::path::PathBuf>,
        /// CSV of sample coordinates (for --method knn).
        #[arg(long)]
        samples: Option<std::path::PathBuf>,
        #[arg(long, value_parser = ["quad", "mc", "knn"])]
        method: String,
    },
}

fn main() -> ExitCode {
    // accept --tol.KEY=VAL by rewriting it to --tol KEY=VAL
    let argv: Vec<String> = std::env::args()
        .flat_map(|a| {
            if let Some(rest) = a.strip_prefix("--tol.") {
                vec!["--tol".to_string(), rest.to_string()]
            } else {
                vec![a]
            }
        })
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(2);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let settings = match commands::Settings::from_args(&cli.run) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match commands::dispatch(&cli.command, &settings) {
        Ok(outcome) => {
            if outcome.check_failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
