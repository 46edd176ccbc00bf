//! Front end for the `molcav` binary.

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Output;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "molcav",
    version,
    about = "Molecular ensemble, cavity and Cooper-pair box register simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Seed for optimizer restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key.path=value`, applied after the config file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Dressed-state angles and energies along a sweep.
    DressedScan,
    /// Run a protocol sequence on an encoded register.
    Run,
    /// Solve modular phase conditions for sweep parameters.
    Optimize,
    /// Decoherence budget.
    Feasibility,
    /// Exact ensemble model against the bosonic approximation.
    OracleCompare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Record,
}

impl Command {
    fn default_format(self) -> Format {
        match self {
            Command::DressedScan | Command::Feasibility | Command::OracleCompare => Format::Csv,
            Command::Run | Command::Optimize => Format::Record,
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn main_with(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(None) => 0,
        Ok(Some(msg)) => {
            eprintln!("molcav: {msg}");
            2
        }
        Err(e) => {
            eprintln!("molcav: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Option<String>> {
    let mut value = config::read(cli.config.as_deref())?;
    if cli.command == Command::Feasibility {
        let mut base = serde_json::to_value(commands::FeasibilityConfig::default())?;
        config::merge(&mut base, value);
        value = base;
    }
    if let (Command::Optimize, Some(seed)) = (cli.command, cli.seed) {
        config::apply_override(&mut value, &format!("solve.seed={seed}"))?;
    }
    for o in &cli.overrides {
        config::apply_override(&mut value, o)?;
    }
    let output = match cli.command {
        Command::DressedScan => commands::dressed_scan(&config::parse(value)?)?,
        Command::Run => commands::run(&config::parse(value)?)?,
        Command::Optimize => commands::optimize(&config::parse(value)?)?,
        Command::Feasibility => commands::feasibility_budget(&config::parse(value)?)?,
        Command::OracleCompare => commands::oracle_compare(&config::parse(value)?)?,
    };
    write(cli, &output)?;
    Ok(output.failure)
}

fn write(cli: &Cli, output: &Output) -> Result<()> {
    let text = match cli.format.unwrap_or(cli.command.default_format()) {
        Format::Csv => emit::csv(&output.table),
        Format::Record => emit::record(&output.record),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}
