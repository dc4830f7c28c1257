//! `ncprob`: command-line experiments with Boolean, monotone and free
//! independence over matrix algebras.

mod cmd;
mod config;
mod error;
mod parse;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::report::{write_rows, write_summary, write_table, Outcome};

#[derive(Parser, Debug)]
#[command(name = "ncprob", version, about = "Noncommutative probability experiments")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Exit with status 1 when any bound row fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Main output CSV (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Bound rows CSV, for commands that also produce a table.
    #[arg(long, global = true)]
    rows: Option<PathBuf>,
    /// Run summary JSON.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    /// JSON file of defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate set partitions of a lattice.
    Partitions(cmd::partitions::Args),
    /// Convert between moments and cumulants.
    Moments(cmd::moments::Args),
    /// Boolean and monotone convolution chains.
    Convolve(cmd::convolve::Args),
    /// Build operator models and dump spectral laws.
    Models(cmd::models::Args),
    /// Boolean Wigner matrices with a variance profile.
    Wigner(cmd::wigner::Args),
    /// Scalar central limit sweeps.
    Clt(cmd::clt::Args),
    /// Lindeberg bounds on operator-valued families.
    Berry(cmd::berry::Args),
    /// Infinitesimal independence checks.
    Inf(cmd::inf::Args),
    /// Monotone sums against the arcsine law.
    FourthMoment(cmd::fourth::Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Partitions(_) => "partitions",
            Self::Moments(_) => "moments",
            Self::Convolve(_) => "convolve",
            Self::Models(_) => "models",
            Self::Wigner(_) => "wigner",
            Self::Clt(_) => "clt",
            Self::Berry(_) => "berry",
            Self::Inf(_) => "inf",
            Self::FourthMoment(_) => "fourth-moment",
        }
    }

    fn parameters(&self) -> CliResult<Value> {
        Ok(match self {
            Self::Partitions(a) => serde_json::to_value(a)?,
            Self::Moments(a) => serde_json::to_value(a)?,
            Self::Convolve(a) => serde_json::to_value(a)?,
            Self::Models(a) => serde_json::to_value(a)?,
            Self::Wigner(a) => serde_json::to_value(a)?,
            Self::Clt(a) => serde_json::to_value(a)?,
            Self::Berry(a) => serde_json::to_value(a)?,
            Self::Inf(a) => serde_json::to_value(a)?,
            Self::FourthMoment(a) => serde_json::to_value(a)?,
        })
    }

    fn run(&self, seed: u64) -> CliResult<Outcome> {
        match self {
            Self::Partitions(a) => cmd::partitions::run(a),
            Self::Moments(a) => cmd::moments::run(a),
            Self::Convolve(a) => cmd::convolve::run(a),
            Self::Models(a) => cmd::models::run(a),
            Self::Wigner(a) => cmd::wigner::run(a),
            Self::Clt(a) => cmd::clt::run(a),
            Self::Berry(a) => cmd::berry::run(a, seed),
            Self::Inf(a) => cmd::inf::run(a, seed),
            Self::FourthMoment(a) => cmd::fourth::run(a),
        }
    }
}

fn execute(cli: &Cli) -> CliResult<usize> {
    let outcome = cli.command.run(cli.seed)?;
    match &outcome.table {
        Some(t) => {
            write_table(t, cli.out.as_deref())?;
            if let Some(p) = &cli.rows {
                write_rows(&outcome.rows, Some(p))?;
            }
        }
        None => write_rows(&outcome.rows, cli.out.as_deref())?,
    }
    let failures = outcome.failures();
    if let Some(path) = &cli.summary {
        let mut s = json!({
            "command": cli.command.name(),
            "seed": cli.seed,
            "parameters": cli.command.parameters()?,
            "rows": outcome.rows,
            "failures": failures,
        });
        if let Value::Object(m) = &mut s {
            m.extend(outcome.summary);
        }
        write_summary(&s, path)?;
    }
    Ok(failures)
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(failures) if failures > 0 && cli.strict => {
            eprintln!("{failures} bound row(s) failed");
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => eprintln!("error: {msg}"),
        _ => eprintln!("{}", json!({"error": e.category(), "message": e.to_string()})),
    }
    ExitCode::from(2)
}
