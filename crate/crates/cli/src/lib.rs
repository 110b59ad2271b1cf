//! Batch front end for the `dtoda` library: reads a TOML run configuration,
//! runs one scenario and writes CSV tables plus `manifest.json`.

// `!(a < b)` guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{parse_run_config, ConfigError, RunConfig};
use error::{exit, CliError};
use output::{Manifest, Sink};

#[derive(Parser, Debug)]
#[command(
    name = "dtoda",
    version,
    about = "Laplacian growth and dispersionless Toda reductions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`. Defaults to `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random fixtures; overrides the config `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Leakage tolerance for flows; overrides `[tolerances] leak`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Evolve the map in x and record boundary, conserved quantities and residuals.
    Simulate,
    /// Run hierarchy flows and record leakage and actions.
    Flows,
    /// Compare closed-form moments and actions with contour integrals.
    Moments,
    /// Run the acceptance battery.
    Verify,
    /// Compare the Lax and Poisson flows of the lattice fields.
    Bihamiltonian,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Flows => "flows",
            Command::Moments => "moments",
            Command::Verify => "verify",
            Command::Bihamiltonian => "bihamiltonian",
        }
    }

    fn needs_config(self) -> bool {
        matches!(self, Command::Simulate | Command::Flows | Command::Moments)
    }
}

fn cli_config_error(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError {
        line: None,
        field: field.into(),
        msg: msg.into(),
    })
}

fn load(cli: &Cli, man: &mut Manifest) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| cli_config_error("--config", format!("cannot read {}: {e}", path.display())))?;
            man.config = serde_json::Value::String(text.clone());
            let cfg = parse_run_config(&text)?;
            man.config = serde_json::to_value(&cfg.echo)?;
            cfg
        }
        None if cli.command.needs_config() => {
            return Err(cli_config_error(
                "--config",
                format!("`{}` needs --config", cli.command.name()),
            ))
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed)?;
    }
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(cli_config_error("--tol", "must be a positive number"));
        }
        cfg.tolerances.leak = tol;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").to_path_buf())
}

fn execute(cli: &Cli, cfg: &RunConfig, sink: &mut Sink, man: &mut Manifest) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate => commands::simulate(cfg, sink, man),
        Command::Flows => commands::flows(cfg, sink, man),
        Command::Moments => commands::moments_cmd(cfg, sink, man),
        Command::Verify => commands::verify(cfg, sink, man),
        Command::Bihamiltonian => commands::bihamiltonian(cfg, sink, man),
    }
}

/// Runs one command and returns the process exit code. The manifest is
/// written whether or not the run succeeds.
pub fn run(cli: &Cli) -> u8 {
    let mut man = Manifest::new(cli.command.name());
    let loaded = man.phase("load", |man| load(cli, man));
    let dir = out_dir(cli, loaded.as_ref().ok());
    let result = loaded.and_then(|cfg| {
        man.seed = cfg.seed;
        let mut sink = Sink::new(&dir)?;
        let r = execute(cli, &cfg, &mut sink, &mut man);
        man.files = sink.files.clone();
        r
    });
    let code = match &result {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            man.status = "error".into();
            man.error = Some(e.to_string());
            e.exit_code()
        }
    };
    man.exit_code = code;
    if let Err(e) = man.write(&dir) {
        eprintln!("error: cannot write manifest: {e}");
        return if code == exit::OK { exit::FAILURE } else { code };
    }
    code
}
