//! `xover`: batch front-end for locally D-optimal crossover designs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{apply_override, from_table, read_table, split_override, Command, ConfigError, SCHEMA_VERSION};
use output::Outputs;

#[derive(Parser)]
#[command(
    name = "xover",
    version,
    about = "Locally D-optimal crossover designs for marginal GLMs fitted by GEE"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever command a config file declares.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Optimal weights for one problem.
    Optimize(CommandArgs),
    /// Relative D-efficiency of a design chosen under assumed values.
    Efficiency(CommandArgs),
    /// Cross every pair of correlation structures and report efficiencies.
    MisspecTable(CommandArgs),
    /// Two-stage pilot-then-optimize simulation against uniform allocation.
    Simulate(CommandArgs),
    /// Per-sequence intermediate matrices of the variance computation.
    DumpMatrices(CommandArgs),
    /// Parse and check a config, then print it in normalized form.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Built-in named problems.
    ListFixtures,
}

#[derive(Args)]
struct CommandArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named problem, e.g. `ab-ba-theta1`; see `list-fixtures`.
    #[arg(long)]
    fixture: Option<String>,
    /// Default correlation setting, e.g. `Corr(2)`.
    #[arg(long)]
    structure: Option<String>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct RunOpts {
    /// Override a single config key, e.g. `--set optimizer.restarts=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp line from CSV and JSON outputs.
    #[arg(long)]
    no_timestamp: bool,
    /// Suppress the stdout summary.
    #[arg(long)]
    quiet: bool,
}

fn base_table(config: Option<&PathBuf>) -> Result<toml::Table, ConfigError> {
    match config {
        Some(path) => read_table(path),
        None => {
            let mut t = toml::Table::new();
            t.insert("schema_version".into(), toml::Value::Integer(i64::from(SCHEMA_VERSION)));
            Ok(t)
        }
    }
}

fn apply_opts(table: &mut toml::Table, opts: &RunOpts) -> Result<(), ConfigError> {
    for arg in &opts.set {
        let (key, value) = split_override(arg)?;
        apply_override(table, key, value)?;
    }
    if let Some(seed) = opts.seed {
        let seed = i64::try_from(seed).map_err(|_| ConfigError::new("seed", "seed does not fit in a TOML integer"))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    let output = table
        .entry("output")
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::new("output", "must be a table"))?;
    if let Some(dir) = &opts.out {
        output.insert("dir".into(), toml::Value::String(dir.display().to_string()));
    }
    if opts.no_timestamp {
        output.insert("timestamp".into(), toml::Value::Boolean(false));
    }
    Ok(())
}

fn subcommand_table(command: Command, args: &CommandArgs) -> Result<toml::Table, ConfigError> {
    let mut table = base_table(args.config.as_ref())?;
    match table.get("command").and_then(|v| v.as_str()) {
        Some(declared) if declared != command.name() => {
            return Err(ConfigError::new(
                "command",
                format!("config declares '{declared}' but '{}' was requested", command.name()),
            ))
        }
        _ => {
            table.insert("command".into(), toml::Value::String(command.name().into()));
        }
    }
    if let Some(f) = &args.fixture {
        apply_override(&mut table, "problem.fixture", &format!("{f:?}"))?;
    }
    if let Some(s) = &args.structure {
        apply_override(&mut table, "problem.structure", &format!("{s:?}"))?;
    }
    apply_opts(&mut table, &args.opts)?;
    Ok(table)
}

fn run_table(table: toml::Table, quiet: bool) -> Result<()> {
    let cfg = from_table(table)?;
    let mut out = Outputs::new(cfg.output.dir.clone(), cfg.output.timestamp);
    let summary = commands::execute(&cfg, &mut out)?;
    if !quiet {
        print!("{summary}");
        for path in out.written() {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let (command, args) = match cli.cmd {
        Cmd::ListFixtures => {
            print!("{}", commands::list_fixtures());
            return Ok(());
        }
        Cmd::Validate { config, set } => {
            let mut table = read_table(&config)?;
            for arg in &set {
                let (key, value) = split_override(arg)?;
                apply_override(&mut table, key, value)?;
            }
            print!("{}", from_table(table)?.to_toml());
            return Ok(());
        }
        Cmd::Run { config, opts } => {
            let mut table = read_table(&config)?;
            apply_opts(&mut table, &opts)?;
            return run_table(table, opts.quiet);
        }
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Efficiency(a) => (Command::Efficiency, a),
        Cmd::MisspecTable(a) => (Command::MisspecTable, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::DumpMatrices(a) => (Command::DumpMatrices, a),
    };
    let table = subcommand_table(command, &args)?;
    run_table(table, args.opts.quiet)
}

/// Exit status and error class for the machine-readable report.
fn classify(err: &anyhow::Error) -> (u8, &'static str, Option<String>) {
    if let Some(c) = err.downcast_ref::<ConfigError>() {
        return (2, "config", Some(c.path.clone()));
    }
    match err.downcast_ref::<xover_core::Error>() {
        Some(xover_core::Error::DidNotConverge { .. } | xover_core::Error::FitDidNotConverge { .. }) => {
            (4, "nonconvergence", None)
        }
        Some(_) => (3, "numerical", None),
        None => (1, "io", None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind, path) = classify(&err);
            let message = match err.downcast_ref::<ConfigError>() {
                Some(c) => c.message.clone(),
                None => format!("{err:#}"),
            };
            let report = serde_json::json!({ "error": kind, "path": path, "message": message, "exit_code": code });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
