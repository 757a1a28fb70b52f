//! `cwsoc`: simulate, verify, solve and estimate from the command line.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 an asserted property
//! failed, 3 a numerical method did not converge.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cwsoc::Error;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "cwsoc", version, about = "Dynamical Curie-Weiss SOC laboratory")]
pub struct Cli {
    /// Config file (sectioned key = value).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output leaf directory; defaults to a UTC timestamp.
    #[arg(long, global = true)]
    pub label: Option<String>,
    /// Override any config key, e.g. `--set model.n=1000`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE", value_parser = parse_kv)]
    pub set: Vec<(String, String)>,

    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Horizon (or evaluation time for `check`).
    #[arg(long = "t", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub y0: Option<f64>,
    #[arg(long, global = true)]
    pub no_noise: bool,
    /// Scaling exponent, `b_n = n^alpha`.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected SECTION.KEY=VALUE, got `{s}`"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample paths of the microscopic, reduced or limiting processes.
    Simulate {
        #[command(subcommand)]
        which: SimKind,
    },
    /// Metropolis sampler for the static measure.
    Gibbs,
    /// Symbolic and numeric checks of the Hamiltonian expansion.
    Verify {
        #[command(subcommand)]
        which: VerifyKind,
    },
    /// Action of a path read from a `t,x` CSV.
    Action {
        #[arg(long)]
        path: PathBuf,
    },
    /// Minimum-action path between two points.
    OptimalPath,
    /// Grid solution of `f - lambda H f = h`.
    Resolvent,
    /// Statistical checks against the limit theory.
    Check {
        #[command(subcommand)]
        which: CheckKind,
    },
    /// Monte Carlo tube probabilities along an n ladder.
    EstimateRate,
    /// The full acceptance suite.
    LimitsAudit {
        /// Run only these criteria (comma separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum SimKind {
    Full,
    Reduced,
    Fluctuation,
    Critical,
    Ou,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum VerifyKind {
    Cancellation {
        #[arg(long)]
        degree: Option<u32>,
    },
    Expansion,
    Taylor,
    DaggerBound,
    Cutoff,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CheckKind {
    Clt,
    Ou,
    Critical,
    Tail,
    Containment,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::SolverDisagreement(_) | Error::ClampRate { .. }
        | Error::RateNotEstimable(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
