//! `orthogeo`: batch front end for building geometries, verifying their
//! properties, emitting and replaying null-homotopy certificates and auditing
//! amalgams. Every command prints one JSON report.
//!
//! Exit codes: 0 pass, 1 verified failure, 2 configuration error, 3 search
//! exhausted, 4 cap reached (inconclusive).

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use config::{AmalgamAction, Lemma, RunConfig};

/// Version tag of every report and certificate file.
pub const SCHEMA: &str = "orthogeo/1";

const DEFAULT_SEED: u64 = 0;
const DEFAULT_CAP: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("cap reached: {0}")]
    Cap(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    fn outcome(&self) -> Outcome {
        match self {
            CliError::Config(_) | CliError::Io { .. } => Outcome::ConfigError,
            CliError::SearchExhausted(_) => Outcome::SearchExhausted,
            CliError::Cap(_) => Outcome::Cap,
            CliError::Failed(_) => Outcome::Fail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    ConfigError,
    SearchExhausted,
    Cap,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::ConfigError => 2,
            Outcome::SearchExhausted => 3,
            Outcome::Cap => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::ConfigError => "config_error",
            Outcome::SearchExhausted => "search_exhausted",
            Outcome::Cap => "inconclusive_cap",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "orthogeo", version, about = "Orthogonal geometries, amalgams and null-homotopy certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the single random generator (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on enumerations, element counts and instance counts.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Report file; for `certify`, the directory receiving certificates.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Exhaustive instead of sampled sweeps.
    #[arg(long, global = true)]
    exhaustive: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a geometry and print it with element counts.
    Build,
    /// Check a property: pointline, diameter, linecounts, typerules or
    /// geometryaxioms.
    Verify {
        #[arg(long)]
        lemma: Option<String>,
    },
    /// Emit and self-verify null-homotopy certificates.
    Certify {
        /// Re-verify a certificate file instead of generating.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Amalgam audits: present, enumerate, tits, shape-reduce or cover.
    Amalgam {
        #[arg(long)]
        action: Option<String>,
    },
    /// Re-verify certificate files.
    Replay { files: Vec<PathBuf> },
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| CliError::Config(format!("unknown {what} `{s}`")))
}

fn run(cli: &Cli, config: &RunConfig) -> Result<(Value, Outcome), CliError> {
    let ctx = commands::Ctx {
        config,
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        cap: cli.cap.or(config.cap).unwrap_or(DEFAULT_CAP),
        exhaustive: cli.exhaustive,
    };
    match &cli.command {
        Command::Build => commands::build(&ctx),
        Command::Verify { lemma } => {
            let lemma: Lemma = match lemma {
                Some(s) => parse_enum("lemma", s)?,
                None => config.verify.lemma.clone().ok_or_else(|| CliError::Config("no lemma given".into()))?,
            };
            commands::verify(&ctx, lemma)
        }
        Command::Certify { replay: Some(file) } => commands::replay(&[file]),
        Command::Certify { replay: None } => commands::certify(&ctx, cli.out.as_deref()),
        Command::Amalgam { action } => {
            let action: AmalgamAction = match action {
                Some(s) => parse_enum("action", s)?,
                None => config.amalgam.action.ok_or_else(|| CliError::Config("no action given".into()))?,
            };
            commands::amalgam(&ctx, action)
        }
        Command::Replay { files } => commands::replay(files),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Build => "build",
        Command::Verify { .. } => "verify",
        Command::Certify { replay: Some(_) } => "certify --replay",
        Command::Certify { .. } => "certify",
        Command::Amalgam { .. } => "amalgam",
        Command::Replay { .. } => "replay",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let seed = cli.seed.or(config.as_ref().ok().and_then(|c| c.seed)).unwrap_or(DEFAULT_SEED);
    let (body, outcome) = match config.and_then(|c| run(&cli, &c)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("orthogeo: {e}");
            (json!({ "error": e.to_string() }), e.outcome())
        }
    };
    let mut report = json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "rng": "chacha8",
        "seed": seed,
        "status": outcome.name(),
    });
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    let text = serde_json::to_string_pretty(&report).expect("reports serialise") + "\n";
    // certify writes certificates into --out and its report next to them
    let target = match (&cli.command, &cli.out) {
        (Command::Certify { replay: None }, Some(dir)) if outcome != Outcome::ConfigError => Some(dir.join("report.json")),
        (_, out) => out.clone(),
    };
    match target {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &text) {
                eprintln!("orthogeo: {}: {e}", path.display());
                return ExitCode::from(Outcome::ConfigError.code());
            }
        }
        // a closed pipe is the reader's choice, not an error of the run
        None => drop(std::io::stdout().write_all(text.as_bytes())),
    }
    ExitCode::from(outcome.code())
}
