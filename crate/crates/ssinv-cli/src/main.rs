//! `ssinv`: optimal (s, S) and barrier inventory policies for
//! spectrally negative Lévy demand, computed through q-scale functions.
//!
//! Exit codes: `0` success, `1` a `check` run found failures, `2`
//! unusable configuration or command line, `3` numerical failure on an
//! otherwise valid configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "ssinv",
    version,
    about = "Optimal (s, S) impulse control for spectrally negative Levy inventories"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Configuration file (INI; see configs/reference.ini).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory (overrides `dir` in [output]).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Grid lower end (overrides `x_min` in [output]).
    #[arg(long, value_name = "X")]
    x_min: Option<f64>,
    /// Grid upper end (overrides `x_max` in [output]).
    #[arg(long, value_name = "X")]
    x_max: Option<f64>,
    /// Grid spacing (overrides `x_step` in [output]).
    #[arg(long, value_name = "STEP")]
    x_step: Option<f64>,
    /// Simulation seed (overrides `seed` in [sim]).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Cost parameter to sweep: `c` (proportional) or `k` (fixed).
    #[arg(long, value_name = "NAME")]
    param: String,
    /// Comma-separated parameter values, e.g. `10,5,1,0.1`.
    #[arg(long, value_name = "LIST")]
    values: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the optimal policy and write solution.csv.
    Solve(Common),
    /// Tabulate v and ṽ over the x-grid into value.csv.
    Value(Common),
    /// Re-solve across a list of C or K values into sweep.csv.
    Sweep(SweepArgs),
    /// Monte Carlo cross-validation of the analytic values (mc.csv).
    Simulate(Common),
    /// Run the internal consistency battery; exit 1 on any failure.
    Check(Common),
}

fn load(common: &Common) -> CliResult<RunConfig> {
    RunConfig::load(&common.config)?.with_overrides(
        common.out.clone(),
        common.x_min,
        common.x_max,
        common.x_step,
        common.seed,
    )
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    match cli.cmd {
        Cmd::Solve(c) => run::cmd_solve(&load(&c)?).map(|()| true),
        Cmd::Value(c) => run::cmd_value(&load(&c)?).map(|()| true),
        Cmd::Sweep(a) => run::cmd_sweep(&load(&a.common)?, &a.param, &a.values).map(|()| true),
        Cmd::Simulate(c) => run::cmd_simulate(&load(&c)?).map(|()| true),
        Cmd::Check(c) => run::cmd_check(&load(&c)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Numerical(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
