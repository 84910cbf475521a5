//! `regnets` command-line driver.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "regnets", version, about = "Regularizing networks for sparse-angle tomography")]
struct Cli {
    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// comma separated regularization parameters
    #[arg(long, global = true, value_name = "LIST")]
    alpha: Option<String>,
    /// comma separated noise levels
    #[arg(long, global = true, value_name = "LIST")]
    delta: Option<String>,
    /// 128x128 grid, 30 angles, 1000/250 phantoms, 15 alphas
    #[arg(long, global = true)]
    paper_scale: bool,
    /// output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the Radon matrix and its singular system
    Assemble,
    /// Generate training and test phantoms with clean sinograms
    Phantoms,
    /// Train one network per alpha for every configured variant
    Train,
    /// Reconstruct one test image with the validated alpha of each method
    Reconstruct,
    /// Test-set errors per alpha and noise level
    Evaluate,
    /// Convergence rate of the classical filter on a source element
    Rates,
    /// Distance function of a trained family on test images
    Distfn,
    /// Verify the filter axioms and qualification
    Checkfilter,
}

fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &cli.alpha {
        cfg.set("alphas", list)?;
    }
    if let Some(list) = &cli.delta {
        let key = if cli.command == Command::Rates { "rate_deltas" } else { "deltas" };
        cfg.set(key, list)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = configure(cli)?;
    match cli.command {
        Command::Assemble => commands::assemble(&cfg),
        Command::Phantoms => commands::phantoms(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Reconstruct => commands::reconstruct(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Rates => commands::rates(&cfg),
        Command::Distfn => commands::distfn(&cfg),
        Command::Checkfilter => commands::checkfilter(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(report) => {
            if !report.is_empty() {
                println!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("regnets: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
