//! `setmc` command-line front end.
//!
//! Exit codes: `0` success, `1` bad input or flags, `2` the solver stopped
//! without converging (or a self-check failed).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_sweep, SweepConfig};
use crate::checks::run_all;
use crate::error::{Result, SetError};
use crate::io::{format_dense, read_observed, write_dense};
use crate::solver::{residual_relative, set_complete, SolverConfig, SolverStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "setmc",
    version,
    about = "Consistent low-rank matrix completion by subspace evolution and transfer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete one partially observed matrix.
    Complete(CompleteArgs),
    /// Success rates over random instances and sampling rates.
    Bench(BenchArgs),
    /// Run the built-in numerical self-checks.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Observation file: `m n` header, then `i j value` lines (1-based).
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    /// Relative stopping tolerance on the observed residual.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_transfer: bool,
    /// Write the completed matrix here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rank: usize,
    /// Comma-separated sampling rates in (0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub rates: Vec<f64>,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_transfer: bool,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct CompleteReport {
    status: &'static str,
    iterations: usize,
    transfers: usize,
    relative_residual: f64,
    elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport<'a> {
    out: &'a str,
    rates: usize,
    trials: usize,
    successes: usize,
    contract_violations: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli.command, out, err),
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            EXIT_INPUT
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            EXIT_OK
        }
    }
}

pub fn dispatch(command: Command, out: &mut impl Write, err: &mut impl Write) -> i32 {
    match command {
        Command::Complete(a) => cmd_complete(&a, out, err),
        Command::Bench(a) => cmd_bench(&a, out, err),
        Command::Check(a) => cmd_check(&a, out),
    }
}

fn report_error(err: &mut impl Write, e: &SetError) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_INPUT
}

pub fn cmd_complete(args: &CompleteArgs, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let run = || -> Result<(String, CompleteReport, SolverStatus)> {
        let x = read_observed(&args.input)?;
        let cfg = SolverConfig {
            epsilon_e: args.tol,
            max_outer_iters: args.max_iters,
            seed: args.seed,
            transfer_enabled: !args.no_transfer,
            ..SolverConfig::new(args.rank)
        };
        let (x_hat, report) = set_complete(&x, &cfg)?;
        let relative_residual = residual_relative(&x_hat, &x).unwrap_or(0.0);
        let csv = match &args.out {
            Some(path) => {
                write_dense(path, &x_hat)?;
                String::new()
            }
            None => format_dense(&x_hat),
        };
        let summary = CompleteReport {
            status: report.status.as_str(),
            iterations: report.iterations,
            transfers: report.transfers_performed,
            relative_residual,
            elapsed_ms: report.elapsed.as_secs_f64() * 1e3,
        };
        Ok((csv, summary, report.status))
    };
    match run() {
        Ok((csv, summary, status)) => {
            let json = serde_json::to_string(&summary).expect("plain struct serializes");
            if write!(out, "{csv}").and_then(|_| writeln!(out, "{json}")).is_err() {
                return EXIT_INPUT;
            }
            if status == SolverStatus::Converged {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => report_error(err, &e),
    }
}

pub fn cmd_bench(args: &BenchArgs, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let cfg = SweepConfig {
        m: args.m,
        n: args.n,
        r: args.rank,
        rates: args.rates.clone(),
        trials: args.trials,
        master_seed: args.seed,
        jobs: args.jobs.unwrap_or(0),
        solver: SolverConfig {
            max_outer_iters: args.max_iters,
            transfer_enabled: !args.no_transfer,
            ..SolverConfig::new(args.rank)
        },
    };
    let result = match run_sweep(&cfg).and_then(|r| r.write_csv(&args.out).map(|_| r)) {
        Ok(r) => r,
        Err(e) => return report_error(err, &e),
    };
    let summary = BenchReport {
        out: &args.out.to_string_lossy(),
        rates: result.rows.len(),
        trials: args.trials,
        successes: result.rows.iter().map(|r| r.successes).sum(),
        contract_violations: result.contract_violations,
    };
    let json = serde_json::to_string(&summary).expect("plain struct serializes");
    let _ = writeln!(out, "{json}");
    EXIT_OK
}

pub fn cmd_check(args: &CheckArgs, out: &mut impl Write) -> i32 {
    let outcomes = run_all(args.seed);
    for c in &outcomes {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{mark} {} ({:.2}s): {}", c.name, c.elapsed.as_secs_f64(), c.detail);
    }
    if outcomes.iter().all(|c| c.passed) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}
