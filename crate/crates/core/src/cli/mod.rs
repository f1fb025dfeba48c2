//! Command-line experiment runner.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use config::RunConfig;
use output::{sha256_hex, OutputDir, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "apflow", version, about = "Averaging, index and recurrence experiments for oscillatory parabolic equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check ellipticity, growth, dissipativeness and tail decay.
    Validate(RunArgs),
    /// Integrate the process and monitor tail mass.
    Simulate(RunArgs),
    /// Sweep omega and compare with the averaged equation.
    Average(RunArgs),
    /// Spectrum, negative multiplicity and symbolic index.
    Index(RunArgs),
    /// Recurrence evidence on a skew-product orbit.
    Recurrence(RunArgs),
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for parallel sweeps.
    #[arg(long, env = "APFLOW_JOBS")]
    pub jobs: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Simulate(_) => "simulate",
            Command::Average(_) => "average",
            Command::Index(_) => "index",
            Command::Recurrence(_) => "recurrence",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Validate(a)
            | Command::Simulate(a)
            | Command::Average(a)
            | Command::Index(a)
            | Command::Recurrence(a) => a,
        }
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut OutputDir) -> Result<commands::Checks> {
    match command {
        Command::Validate(_) => commands::cmd_validate(cfg, out),
        Command::Simulate(_) => commands::cmd_simulate(cfg, out),
        Command::Average(_) => commands::cmd_average(cfg, out),
        Command::Index(_) => commands::cmd_index(cfg, out),
        Command::Recurrence(_) => commands::cmd_recurrence(cfg, out),
    }
}

fn execute(command: &Command, text: &str, root: &Path, manifest: &mut RunManifest) -> Result<()> {
    let cfg = RunConfig::parse(text)?;
    let mut out = OutputDir::create(root)?;
    let result = dispatch(command, &cfg, &mut out);
    manifest.set("outputs", out.files().join(","));
    for (k, v) in result? {
        manifest.set(k, v);
    }
    Ok(())
}

/// Runs one command and writes its manifest; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let command = &cli.command;
    let args = command.args();
    let mut manifest = RunManifest::default();
    manifest.set("command", command.name());
    manifest.set("toolkit_version", env!("CARGO_PKG_VERSION"));
    manifest.set("config", args.config.display().to_string());

    let outcome = match std::fs::read(&args.config) {
        Err(e) => Err(Error::config(format!("cannot read {}: {e}", args.config.display()))),
        Ok(bytes) => {
            manifest.set("config_sha256", sha256_hex(&bytes));
            match String::from_utf8(bytes) {
                Err(_) => Err(Error::config("config is not valid UTF-8")),
                Ok(text) => {
                    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.unwrap_or(0)).build();
                    match pool {
                        Ok(pool) => pool.install(|| execute(command, &text, &args.out, &mut manifest)),
                        Err(e) => Err(Error::config(format!("cannot start {} worker threads: {e}", args.jobs.unwrap_or(0)))),
                    }
                }
            }
        }
    };
    let code = match &outcome {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    };
    manifest.set("status", if code == 0 { "ok" } else { "error" });
    manifest.set("exit_code", code.to_string());
    if let Err(e) = &outcome {
        eprintln!("apflow {}: {e}", command.name());
        manifest.set("error", e.to_string());
    }
    manifest.set("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));
    if let Err(e) = manifest.write(&args.out) {
        eprintln!("apflow: cannot write manifest: {e}");
        return if code == 0 { 5 } else { code };
    }
    code
}
