//! `snls <experiment> --config <path> [--seed N] [--out DIR]`
//!
//! Exit codes: 0 success, 2 blow-up detected by a simulate run
//! (informational), 3 numerical failure, 4 configuration error, 5 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;
use snls_core::config::{Experiment, RunConfig};
use snls_core::error::Error;
use snls_core::exec;
use snls_core::experiments;

const EXIT_BLEW_UP: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(
    name = "snls",
    version,
    about = "Numerical laboratory for a weakly damped stochastic nonlinear Schrodinger equation"
)]
struct Cli {
    /// Experiment to run; must match the config's `experiment` key
    experiment: String,
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Usage problems are configuration errors; keep exit code 2 reserved
    // for the blow-up verdict.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            code
        }
    }
}

type Failure = (ExitCode, String);

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let experiment = Experiment::from_str(&cli.experiment).map_err(|()| {
        config_err(format!(
            "unknown experiment `{}`; expected one of {}",
            cli.experiment,
            snls_core::config::EXPERIMENT_NAMES
                .iter()
                .map(|(name, _)| *name)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        (ExitCode::from(EXIT_IO), format!("cannot read {}: {e}", cli.config.display()))
    })?;
    let mut config = RunConfig::parse(&text).map_err(|e| config_err(e.to_string()))?;
    if config.experiment != experiment {
        return Err(config_err(format!(
            "{} configures `{}` but the command line asked for `{experiment}`",
            cli.config.display(),
            config.experiment
        )));
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out_dir = cli
        .out
        .or_else(|| config.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.as_str()));
    let workers = exec::workers_from_env().map_err(|e| config_err(e.to_string()))?;
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let outcome = experiments::run(&config, &out_dir, workers).map_err(classify)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    println!("artifacts in {}", out_dir.display());
    Ok(if outcome.blew_up { ExitCode::from(EXIT_BLEW_UP) } else { ExitCode::SUCCESS })
}

fn config_err(message: String) -> Failure {
    (ExitCode::from(EXIT_CONFIG), message)
}

fn classify(err: Error) -> Failure {
    fn code(err: &Error) -> u8 {
        match err {
            Error::NonFinite { .. } => EXIT_NUMERICAL,
            Error::Trajectory { source, .. } => code(source),
            Error::Io(_) => EXIT_IO,
            _ => EXIT_CONFIG,
        }
    }
    (ExitCode::from(code(&err)), err.to_string())
}
