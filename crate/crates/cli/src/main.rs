//! `fedsched`: experiment runner for the energy-aware training scheduler.

mod config;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use run::{Mode, Options};

#[derive(Parser)]
#[command(
    name = "fedsched",
    version,
    about = "Energy-aware training-schedule experiments: single runs, sweeps, presets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the configured policies at one operating point
    Run(RunArgs),
    /// Simulate the configured V x staleness x arrival-rate grid
    Sweep(RunArgs),
    /// List embedded presets, or print one as TOML
    Presets {
        /// Preset to print; omit to list all
        name: Option<String>,
    },
    /// Parse a config, check every invariant, print the normalized form
    Validate(SourceArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Config file (TOML, flat keys); missing keys take defaults
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Embedded preset name (see `fedsched presets`)
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Base RNG seed (overrides the config's `seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per point, at seeds seed, seed+1, …; adds mean/stddev rows
    #[arg(long, default_value_t = 1, value_name = "K")]
    repeat: u32,
    /// Output directory (overrides the config's `out_dir`)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write one per-slot CSV per run
    #[arg(long)]
    per_slot: bool,
    /// Run a single policy instead of the config's list
    #[arg(long, value_name = "NAME")]
    policy: Option<String>,
}

fn preset_text(name: &str) -> anyhow::Result<&'static str> {
    match presets::lookup(name) {
        Some(text) => Ok(text),
        None => bail!(
            "no preset `{name}` (available: {})",
            presets::PRESETS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

fn load(source: &SourceArgs) -> anyhow::Result<ExperimentConfig> {
    let text = match (&source.config, &source.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?,
        (None, Some(name)) => preset_text(name)?.to_string(),
        (None, None) => String::new(),
    };
    ExperimentConfig::parse(&text)
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Run(args) => {
            let cfg = load(&args.source)?;
            run::execute(&cfg, Mode::Point, &options(&args))
        }
        Cmd::Sweep(args) => {
            let cfg = load(&args.source)?;
            run::execute(&cfg, Mode::Grid, &options(&args))
        }
        Cmd::Presets { name } => {
            match name {
                Some(name) => print!("{}", preset_text(&name)?),
                None => {
                    for (name, text) in presets::PRESETS {
                        println!("{name:<8}{}", presets::describe(text));
                    }
                }
            }
            Ok(())
        }
        Cmd::Validate(source) => {
            let cfg = load(&source)?;
            print!("{}", cfg.serialize());
            Ok(())
        }
    }
}

fn options(args: &RunArgs) -> Options {
    Options {
        seed: args.seed,
        repeat: args.repeat,
        out: args.out.clone(),
        per_slot: args.per_slot,
        policy: args.policy.clone(),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
