use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use semimdim_core::harness::{emit_report, parse_config, run_with_workers, summary_text, VERSION};
use semimdim_core::OracleInstance;

/// Environment variable holding the worker count. It is the only setting
/// read from the environment.
const WORKERS_ENV: &str = "SEMIMDIM_WORKERS";

/// Largest instance the exact oracle accepts from the command line.
const ORACLE_CAP: usize = 24;

#[derive(Parser)]
#[command(
    name = "semimdim",
    about = "Entropy and mean dimension of semigroup actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves.csv, mdim.csv, comparators.csv and summary.txt.
    Run {
        config: PathBuf,
        /// Output directory; overrides `[output] dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and list every problem found.
    Validate { config: PathBuf },
    /// Solve a small packing or covering instance exactly.
    Oracle { instance: PathBuf },
    /// Print the tool version.
    Version,
}

fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))?;
            anyhow::ensure!(n > 0, "{WORKERS_ENV} must be positive");
            Ok(n)
        }
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Version => {
            println!("semimdim {VERSION}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let text = read(&config)?;
            match parse_config(&text) {
                Ok(_) => {
                    println!("{}: ok", config.display());
                    Ok(ExitCode::SUCCESS)
                }
                Err(errors) => {
                    for e in &errors.0 {
                        eprintln!("{}: {e}", config.display());
                    }
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Oracle { instance } => {
            let text = read(&instance)?;
            let inst = OracleInstance::parse(&text)
                .with_context(|| format!("parsing {}", instance.display()))?;
            let value = inst.solve(ORACLE_CAP)?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let text = read(&config)?;
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(errors) => {
                    for e in &errors.0 {
                        eprintln!("{}: {e}", config.display());
                    }
                    return Ok(ExitCode::from(2));
                }
            };
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("report"));
            let report = run_with_workers(&cfg, workers()?)?;
            emit_report(&report, &dir)?;
            print!("{}", summary_text(&report));
            eprintln!(
                "elapsed {:.2}s, count cache {} entries ({} hits, {} misses)",
                report.stats.elapsed.as_secs_f64(),
                report.stats.cache_entries,
                report.stats.cache_hits,
                report.stats.cache_misses
            );
            for (task, msg) in &report.failures {
                eprintln!("failed: {task}: {msg}");
            }
            Ok(if report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
