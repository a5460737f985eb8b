//! `isoswarm` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 data or model, 4 I/O.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use isoswarm::{Error, Result};

use crate::commands::Command;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "isoswarm",
    version,
    about = "Per-class isolation forests with swarm-tuned thresholds for N-day and zero-day attack recognition"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run configuration. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        return 4;
    }
    match e.root() {
        Error::InvalidConfig(_) => 2,
        _ => 3,
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cli.command.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    cli.command.run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
