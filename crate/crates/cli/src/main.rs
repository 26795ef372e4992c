//! `bates`: command-line front end for the pricing engine.
//!
//! Exit codes: 0 ok, 1 invariant failure, 2 input error, 3 numerical error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Emitted, Flags, Method, TableId};
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl From<bates_engine::Error> for CliError {
    fn from(e: bates_engine::Error) -> Self {
        use bates_engine::Error as E;
        match e {
            E::Param(_) | E::Curve(_) | E::Index(_) | E::Shape { .. } | E::Reduction | E::Style | E::Domain(_) | E::Scope(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "bates", version, about = "Option pricing under Heston, Bates and Bates-Hull-White dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration, or JSON when the name ends in .json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "htfd")]
    method: Method,
    /// Overrides the Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Full-precision numbers instead of 6 significant digits.
    #[arg(long, global = true)]
    raw: bool,
    /// Runs a single validation group.
    #[arg(long, global = true)]
    only: Option<String>,
    /// Validates input and emits headers only.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Leaves runtime out of the price report so runs are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Prices the configured contract.
    Price,
    /// Sweeps a benchmark table over spots and space steps.
    Table {
        #[arg(value_enum)]
        id: TableId,
    },
    /// Prices at doubling time steps and reports convergence ratios.
    Converge,
    /// Implied volatilities across moneyness or maturity.
    Smile,
    /// Runs the invariant groups.
    Validate,
}

fn run(cli: Cli) -> Result<Emitted, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    let out = cli.out.clone().or(cfg.output.clone());
    let flags = Flags {
        method: cli.method,
        raw: cli.raw,
        dry_run: cli.dry_run,
        timing: !cli.no_timing,
        only: cli.only.clone(),
    };
    let emitted = match cli.command {
        Command::Price => commands::cmd_price(cfg, &flags)?,
        Command::Table { id } => commands::cmd_table(cfg, id, &flags)?,
        Command::Converge => commands::cmd_converge(cfg, &flags)?,
        Command::Smile => commands::cmd_smile(cfg, &flags)?,
        Command::Validate => commands::cmd_validate(cfg, &flags)?,
    };
    match out {
        Some(path) => std::fs::write(&path, &emitted.text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{}", emitted.text),
    }
    Ok(emitted)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(e) if e.ok => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}
