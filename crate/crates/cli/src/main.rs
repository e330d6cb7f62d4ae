//! `hermsob`: run verification batteries, best-constant sweeps, sequence
//! scans, and strip-interpolation checks from a sectioned config file.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or
//! runtime error.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{parse_config, CommandKind};
use run::Outcome;

#[derive(Parser)]
#[command(name = "hermsob", version, about)]
struct Cli {
    /// Command to run (overrides the config's `command` key)
    #[arg(value_parser = ["verify", "sweep", "sequences", "interpolate"])]
    command: Option<String>,

    /// Run configuration file
    #[arg(long)]
    config: PathBuf,

    /// Output CSV path (overrides the config's `[output]` path; stdout if
    /// neither is given)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Random seed (overrides the config's `seed` key)
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for independent problems
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("hermsob: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("hermsob: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(cmd) = &cli.command {
        config.command = CommandKind::parse(cmd).unwrap();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.display().to_string());
    }

    let (csv, outcome) = match cli.jobs {
        Some(jobs) if jobs >= 1 => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("hermsob: cannot build thread pool: {e}");
                    return ExitCode::from(2);
                }
            };
            pool.install(|| run::run(&config))
        }
        Some(_) => {
            eprintln!("hermsob: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        None => run::run(&config),
    };

    match &config.output {
        Some(path) => {
            if let Err(e) = fs::write(path, &csv) {
                eprintln!("hermsob: cannot write {path}: {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{csv}"),
    }

    match outcome {
        Outcome::Pass => ExitCode::SUCCESS,
        Outcome::CheckFailed(msg) => {
            eprintln!("hermsob: check failed: {msg}");
            ExitCode::from(1)
        }
        Outcome::Error(msg) => {
            eprintln!("hermsob: {msg}");
            ExitCode::from(2)
        }
    }
}
