//! Command-line front end of `hybridqkd`: configuration files, sweeps and
//! CSV output.
//!
//! Every command reads a [`config::RunConfig`] from a profile or file,
//! evaluates the engine in parallel and writes deterministic CSV.

pub mod commands;
pub mod config;
pub mod gnuplot;
pub mod profiles;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{Command, ConfigError, RawConfig, RunConfig};
use crate::gnuplot::PlotSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Domain(#[from] hybridqkd::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for usage and configuration errors, 3 for domain errors, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "hybridqkd",
    version,
    about = "BB84 key rates of quantum-dot and laser photon mixtures",
    after_help = "Any configuration key can be overridden with --section.key=value, \
                  e.g. --channel.db=0:40:0.5 or --detector.e_d=0.01."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Input {
    /// Configuration file.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Named profile, searched in $HYBRIDQKD_PROFILE_DIR and then among the
    /// bundled ones.
    #[arg(long, default_value = "table1")]
    profile: String,
    /// Output path (`-` for stdout); overrides `run.output`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Key rate for each laser mean over the attenuation grid.
    Scan(Input),
    /// Optimal laser admixture per attenuation.
    Optimize(Input),
    /// Advantage thresholds and the optimal-ratio grid.
    Threshold(Input),
    /// Pulse-level simulation against the analytic model.
    Montecarlo(Input),
    /// Data and gnuplot scripts for every figure, written to a directory.
    Figures(Input),
    /// The command named by `run.command`.
    Run(Input),
    /// Gnuplot script for a CSV file.
    Gnuplot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long = "y", required = true)]
        ys: Vec<String>,
        /// Column whose distinct values become separate curves.
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        logy: bool,
        #[arg(long)]
        title: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lists bundled profiles or prints one.
    Profiles { name: Option<String> },
}

/// Splits `--section.key=value` overrides from the remaining arguments.
fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        match arg.to_str().and_then(|s| s.strip_prefix("--")) {
            Some(body) if body.split('=').next().is_some_and(|k| k.contains('.')) => {
                overrides.push(body.to_string())
            }
            _ => rest.push(arg),
        }
    }
    (rest, overrides)
}

pub fn load_config(
    config: Option<&Path>,
    profile: &str,
    overrides: &[String],
) -> Result<RunConfig, CliError> {
    let (label, text) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
            (path.display().to_string(), text)
        }
        None => {
            let p = profiles::load(profile)?;
            (p.label, p.text)
        }
    };
    let mut raw = RawConfig::parse(&text, &label)?;
    for o in overrides {
        raw.apply_override(o)?;
    }
    Ok(raw.resolve()?)
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).map_err(io(format!("cannot write {}", p.display())))
        }
        _ => stdout.write_all(text.as_bytes()).map_err(io("cannot write to stdout")),
    }
}

fn execute(
    command: Command,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let output = cfg.output.as_deref();
    match command {
        Command::Scan => emit(&commands::scan(cfg)?.to_csv(), output, stdout),
        Command::Optimize => emit(&commands::optimize(cfg)?.to_csv(), output, stdout),
        Command::Montecarlo => emit(&commands::montecarlo(cfg)?.to_csv(), output, stdout),
        Command::Threshold => {
            let out = commands::threshold(cfg)?;
            let to_file = output.is_some_and(|p| p != Path::new("-"));
            let report_sink: &mut dyn Write = if to_file { stdout } else { stderr };
            report_sink
                .write_all(out.to_text().as_bytes())
                .map_err(io("cannot write report"))?;
            emit(&out.grid.to_csv(), output, stdout)
        }
        Command::Figures => {
            let dir = output.unwrap_or(Path::new("figures"));
            std::fs::create_dir_all(dir).map_err(io(format!("cannot create {}", dir.display())))?;
            for fig in commands::figures(cfg)? {
                let csv_name = format!("{}.csv", fig.name);
                let csv = fig.table.to_csv();
                let groups = fig
                    .plot
                    .group
                    .as_deref()
                    .and_then(|g| gnuplot::distinct_values(&csv, g))
                    .unwrap_or_default();
                let script = gnuplot::script(&csv_name, &fig.plot, &groups);
                let csv_path = dir.join(&csv_name);
                std::fs::write(&csv_path, &csv).map_err(io(format!("cannot write {}", csv_path.display())))?;
                let gp_path = dir.join(format!("{}.gp", fig.name));
                std::fs::write(&gp_path, script).map_err(io(format!("cannot write {}", gp_path.display())))?;
                writeln!(stdout, "{}", csv_path.display()).map_err(io("cannot write to stdout"))?;
            }
            Ok(())
        }
    }
}

/// Runs the command line `args` (including the program name).
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (args, overrides) = split_overrides(args);
    let cli = Cli::try_parse_from(args)?;
    let (command, input) = match cli.command {
        Cmd::Scan(i) => (Some(Command::Scan), i),
        Cmd::Optimize(i) => (Some(Command::Optimize), i),
        Cmd::Threshold(i) => (Some(Command::Threshold), i),
        Cmd::Montecarlo(i) => (Some(Command::Montecarlo), i),
        Cmd::Figures(i) => (Some(Command::Figures), i),
        Cmd::Run(i) => (None, i),
        Cmd::Gnuplot { csv, x, ys, group, logy, title, output } => {
            let text = std::fs::read_to_string(&csv).map_err(io(format!("cannot read {}", csv.display())))?;
            let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
            let mut plot = PlotSpec::new(title.as_deref().unwrap_or(&x), &x, &ys);
            plot.log_y = logy;
            let mut groups = Vec::new();
            if let Some(g) = group {
                groups = gnuplot::distinct_values(&text, &g)
                    .ok_or_else(|| ConfigError::new(format!("{} has no column `{g}`", csv.display())))?;
                plot = plot.grouped(&g);
            }
            let name = csv.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned());
            return emit(&gnuplot::script(&name, &plot, &groups), output.as_deref(), stdout);
        }
        Cmd::Profiles { name } => {
            let text = match name {
                Some(n) => profiles::load(&n)?.text,
                None => profiles::BUNDLED.iter().map(|(n, _)| format!("{n}\n")).collect(),
            };
            return emit(&text, None, stdout);
        }
    };
    let mut cfg = load_config(input.config.as_deref(), &input.profile, &overrides)?;
    if input.output.is_some() {
        cfg.output = input.output;
    }
    let command = command
        .or(cfg.command)
        .ok_or_else(|| ConfigError::new("`run` needs `command` in [run]"))?;
    execute(command, &cfg, stdout, stderr)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod guide {}
