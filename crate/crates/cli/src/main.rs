//! `orlicz-regen`: runs one experiment from a TOML config and writes
//! `report.json` plus CSV tables into the output directory.
//!
//! Exit status: 0 on success, 2 when a soundness check fails, 1 on usage,
//! configuration or runtime errors (with a JSON error object on stdout).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Command, Config};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] orlicz_regen::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Run(_) => "run",
            CliError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "orlicz-regen",
    version,
    about = "Orlicz integrability experiments for regenerative Markov chains"
)]
struct Args {
    /// Command to run; overrides `command` in the config.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to ORLICZ_REGEN_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(err: &CliError) -> ExitCode {
    println!(
        "{}",
        json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
    );
    ExitCode::from(1)
}

fn resolve(args: Args) -> Result<(Command, Config), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<Config>(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => Config::default(),
    };
    if let Some(c) = args.command {
        cfg.command = Some(c);
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = args.out {
        cfg.output.dir = o;
    }
    let command = cfg.command.ok_or_else(|| {
        CliError::Usage("no command given on the command line or in the config".into())
    })?;
    if command.stochastic() && cfg.seed.is_none() {
        return Err(CliError::Config(format!(
            "a seed is required for {}",
            command_name(command)
        )));
    }
    Ok((command, cfg))
}

fn command_name(c: Command) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn workers(args: &Args) -> Result<Option<usize>, CliError> {
    if let Some(w) = args.workers {
        return Ok(Some(w));
    }
    match std::env::var("ORLICZ_REGEN_WORKERS") {
        Ok(v) => v.parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "ORLICZ_REGEN_WORKERS must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string())),
    };
    match workers(&args) {
        Ok(Some(0)) => return fail(&CliError::Usage("--workers must be at least 1".into())),
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                return fail(&CliError::Usage(e.to_string()));
            }
        }
        Ok(None) => {}
        Err(e) => return fail(&e),
    }
    let (command, cfg) = match resolve(args) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    match commands::run(command, &cfg) {
        Ok(outcome) => match commands::write_outputs(command, &cfg, &outcome) {
            Ok(path) => {
                eprintln!("wrote {}", path.display());
                if outcome.sound {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => fail(&e),
        },
        Err(e) => fail(&e),
    }
}
