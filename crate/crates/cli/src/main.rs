//! Batch front end: `smmv <command> --config <path> [--out <path>]`.
//!
//! Exit status is 1 for invalid input and 2 when a solver or simulation
//! fails numerically; `oracle-check` exits 3 when a check fails. Errors are
//! written to standard error as `{"error": kind, "message": text}`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod table;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "smmv",
    version,
    about = "Monotone mean-variance solvers and simulators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte-Carlo seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Gauss-Hermite nodes for lognormal expectations.
    #[arg(long, global = true, default_value_t = smmv::probspace::DEFAULT_NODES)]
    pub quad_nodes: usize,
    /// Residual tolerance; also the pass threshold of deterministic checks.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Monte-Carlo path count.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub paths: usize,
    /// Time steps per path.
    #[arg(long, global = true, default_value_t = 512)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// λ, V, U, the dual minimiser and the domain flag for each payoff.
    EvalPref,
    /// Optimal static portfolio with its KKT and sign reports.
    SolveStatic,
    /// Closed-form saddles and the embedding-duality solution at a state.
    SolveCt,
    /// Monte-Carlo estimates under a chosen feedback strategy.
    Simulate,
    /// Quadrature against closed forms and Monte Carlo against quadrature.
    OracleCheck,
}

fn fail(err: &smmv::Error) -> ExitCode {
    let code = match err {
        smmv::Error::NonConvergence(_) | smmv::Error::NonFinite(_) => 2,
        _ => 1,
    };
    let doc = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    eprintln!("{doc}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&smmv::Error::Validation(e.to_string().trim().to_string())),
    };
    match commands::run(&cli) {
        Ok((table, passed)) => {
            let written = match &cli.out {
                Some(path) => std::fs::File::create(path)
                    .map_err(smmv::Error::from)
                    .and_then(|f| table.write(f)),
                None => {
                    let mut out = std::io::stdout().lock();
                    table.write(&mut out).and_then(|_| Ok(out.flush()?))
                }
            };
            match written {
                Err(e) => fail(&e),
                Ok(()) if passed => ExitCode::SUCCESS,
                Ok(()) => ExitCode::from(3),
            }
        }
        Err(e) => fail(&e),
    }
}
