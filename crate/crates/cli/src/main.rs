//! `stratapc`: fit, compare and check stratified age-period-cohort models
//! from the command line.

mod commands;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stratapc", version, about = "Stratified age-period-cohort mortality models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write posterior summaries.
    Fit(Common),
    /// Fit every requested model and rank them by WAIC.
    Grid(Common),
    /// Summarize counts simulated from the prior.
    PriorCheck(PriorCheck),
    /// Hide cells, predict them back and compute PIT values.
    Hindcast(Common),
    /// Write a synthetic dataset, its adjacency graph and the truth.
    Simulate(Common),
    /// Cross-strata relative-risk curves over periods or cohorts.
    Rr(Common),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration (JSON). Defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Long-format CSV with columns stratum,age,year,deaths,exposure.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edge list CSV with columns from,to,augmented.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated sharing patterns, e.g. M4,M5.
    #[arg(long)]
    pub models: Option<String>,
    /// Comma-separated structures: independent, exchangeable, bym2.
    #[arg(long)]
    pub structures: Option<String>,
    /// Also render SVG figures.
    #[arg(long)]
    pub svg: bool,
    /// Truth file written by `simulate`; `fit` then reports coverage.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Args)]
struct PriorCheck {
    #[command(flatten)]
    common: Common,
    /// Number of prior predictive simulations.
    #[arg(long, default_value_t = 200)]
    sims: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(c) => commands::fit(&c),
        Command::Grid(c) => commands::grid(&c),
        Command::PriorCheck(p) => commands::prior_check(&p.common, p.sims),
        Command::Hindcast(c) => commands::hindcast(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Rr(c) => commands::rr(&c),
    };
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
