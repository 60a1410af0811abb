//! Command-line front end: JSON configs, subcommands, CSV and report output.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod falsify;
pub mod io;
pub mod report;
pub mod reproduce;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{load_config, parse_config, AnalysisConfig};
pub use error::CliError;
pub use report::RunReport;

#[derive(Debug, Parser)]
#[command(name = "impulse-iss", version, about = "ISS analysis of nonlinear impulsive systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON analysis config.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (default: the config's falsification seed, else 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    #[value(name = "example_fdt")]
    ExampleFdt,
    #[value(name = "example_tradeoff")]
    ExampleTradeoff,
    #[value(name = "tightness")]
    Tightness,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory; writes trajectory.csv and sequence.csv.
    Simulate(Common),
    /// Audit the sandwich and implication inequalities of the candidate.
    CheckLyapunov(Common),
    /// Check the fixed dwell-time condition.
    CheckFdt(Common),
    /// Check the generalized average dwell-time condition on a sequence.
    CheckGadt(Common),
    /// Build beta and gamma; writes beta.csv and gamma.csv.
    Estimate(Common),
    /// Monte-Carlo search for violations of the ISS bound; writes trials.csv.
    Falsify(Common),
    /// Reproduce a worked example (no config needed).
    Reproduce {
        name: Example,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(out.display().to_string(), e))
}

/// Runs a parsed command and writes its reports.
pub fn execute(cmd: &Command) -> Result<RunReport, CliError> {
    use commands::*;
    let mut report = match cmd {
        Command::Reproduce { name, seed, out } => {
            ensure_dir(out)?;
            let seed = seed.unwrap_or(DEFAULT_SEED);
            let mut r = match name {
                Example::ExampleFdt => reproduce::example_fdt(out, seed)?,
                Example::ExampleTradeoff => reproduce::example_tradeoff(out, seed)?,
                Example::Tightness => reproduce::tightness(out, seed)?,
            };
            r.write(out)?;
            return Ok(r);
        }
        Command::Simulate(c)
        | Command::CheckLyapunov(c)
        | Command::CheckFdt(c)
        | Command::CheckGadt(c)
        | Command::Estimate(c)
        | Command::Falsify(c) => {
            let cfg = load_config(&c.config)?;
            let seed = resolve_seed(&cfg, c.seed);
            ensure_dir(&c.out)?;
            let out = c.out.as_path();
            let r = match cmd {
                Command::Simulate(_) => cmd_simulate(&cfg, seed, out)?,
                Command::CheckLyapunov(_) => cmd_check_lyapunov(&cfg, seed)?,
                Command::CheckFdt(_) => cmd_check_fdt(&cfg, seed)?,
                Command::CheckGadt(_) => cmd_check_gadt(&cfg, seed, out)?,
                Command::Estimate(_) => cmd_estimate(&cfg, seed, out)?,
                Command::Falsify(_) => cmd_falsify(&cfg, seed, out)?,
                Command::Reproduce { .. } => unreachable!(),
            };
            (r, c.out.clone())
        }
    };
    report.0.write(&report.1)?;
    Ok(report.0)
}

/// Exit code: 0 pass, 1 checked and failed, 2 error.
pub fn run(cli: &Cli) -> i32 {
    match execute(&cli.command) {
        Ok(r) => {
            print!("{}", r.to_text());
            r.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
