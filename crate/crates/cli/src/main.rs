//! Batch driver: one subcommand per run, CSV tables plus `summary.json` and
//! `meta.json` in the output directory.
//!
//! Exit codes: 0 success, 2 configuration, 3 numerical or regime, 4 I/O.

mod commands;
mod config;
mod emit;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::config::Config;
use crate::emit::{json_bytes, write_all, SCHEMA_VERSION};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Scatter,
    Trajectory,
    Homodyne,
    Entropy,
    Phasediagram,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Scatter => "scatter",
            Subcommand::Trajectory => "trajectory",
            Subcommand::Homodyne => "homodyne",
            Subcommand::Entropy => "entropy",
            Subcommand::Phasediagram => "phasediagram",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lightlattice", version, about = "Light scattering from ultracold atoms in optical lattices")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Sectioned key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; required by `trajectory` and `homodyne`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 lets the pool decide).
    #[arg(long)]
    threads: Option<usize>,
    /// Override one configuration value.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String, String)>, CliError> {
    let mut out = Vec::new();
    for item in &cli.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {item}: expected SECTION.KEY=VALUE")))?;
        out.push((key.to_owned(), value.to_owned(), format!("--set {item}")));
    }
    let flags = [
        ("run.seed", cli.seed.map(|s| s.to_string()), "--seed"),
        ("run.threads", cli.threads.map(|t| t.to_string()), "--threads"),
        ("run.out", cli.out.as_ref().map(|p| p.display().to_string()), "--out"),
    ];
    for (key, value, flag) in flags {
        if let Some(value) = value {
            out.push((key.to_owned(), value, flag.to_owned()));
        }
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let config = Config::load(cli.command, cli.config.as_deref(), &overrides(cli)?)?;
    let seed = config.get::<u64>("run", "seed")?;
    let threads = config.get_or("run", "threads", 0usize)?;
    let out_dir = PathBuf::from(config.get_or("run", "out", "out".to_owned())?);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    let output = pool.install(|| match cli.command {
        Subcommand::Scatter => commands::scatter(&config),
        Subcommand::Trajectory => commands::trajectory(&config, seed),
        Subcommand::Homodyne => commands::homodyne(&config, seed),
        Subcommand::Entropy => commands::entropy(&config),
        Subcommand::Phasediagram => commands::phasediagram(&config),
    })?;

    let mut files = Vec::new();
    for (stem, table) in &output.tables {
        files.push((format!("{stem}.csv"), table.to_csv()?));
    }
    files.push(("summary.json".to_owned(), json_bytes(&output.summary)));
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": cli.command.name(),
        "seed": seed,
        "threads": pool.current_num_threads(),
        "inputs": config.inputs(),
        "version": env!("CARGO_PKG_VERSION"),
        "tables": output.tables.iter().map(|(stem, t)| json!({ "file": format!("{stem}.csv"), "rows": t.len() })).collect::<Vec<_>>(),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    files.push(("meta.json".to_owned(), json_bytes(&meta)));
    write_all(&out_dir, &files)?;
    Ok(out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(dir) => {
            eprintln!("{}: wrote {}", cli.command.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
