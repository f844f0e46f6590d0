//! `ddhit`: command-line driver for hitting-time analysis, simulation and
//! experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ddhit::experiment::Engine;
use thiserror::Error;

use crate::config::{apply_override, read_table, resolve, set_path, FileConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] ddhit::Error),
    #[error("checks failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    fn module(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Io(_) => "cli",
            CliError::Core(e) => {
                let chain = variant_chain(e);
                chain[..chain.len().saturating_sub(1)]
                    .iter()
                    .rev()
                    .find_map(|v| module_of(v))
                    .unwrap_or_else(|| e.module())
            }
            CliError::CheckFailed(_) => "rates",
        }
    }

    fn kind(&self) -> String {
        match self {
            CliError::Config(_) => "config".into(),
            CliError::Io(_) => "io".into(),
            CliError::CheckFailed(_) => "check_failed".into(),
            CliError::Core(e) => variant_chain(e).pop().unwrap_or_default(),
        }
    }
}

/// Variant names from the outermost wrapper to the leaf, read off the
/// `Debug` form `Outer(Inner(Leaf { .. }))`.
fn variant_chain(e: &ddhit::Error) -> Vec<String> {
    let dbg = format!("{e:?}");
    let mut rest = dbg.as_str();
    let mut chain = Vec::new();
    loop {
        let ident: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        if ident.is_empty() {
            break;
        }
        rest = &rest[ident.len()..];
        chain.push(ident);
        match rest.strip_prefix('(') {
            Some(r) => rest = r,
            None => break,
        }
    }
    chain
}

fn module_of(variant: &str) -> Option<&'static str> {
    Some(match variant {
        "Model" => "model",
        "Fluid" => "fluid",
        "Rates" | "Rate" => "rates",
        "Ssa" => "ssa",
        "Diffusion" => "diffusion",
        "Oracle" => "oracle",
        "Experiment" => "experiment",
        "Numeric" => "numeric",
        _ => return None,
    })
}

pub(crate) fn core<E: Into<ddhit::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

#[derive(Debug, Parser)]
#[command(name = "ddhit", version, about = "Hitting times of density-dependent Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file (or a JSON run manifest).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = ".")]
    out: PathBuf,
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "DDHIT_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Config override `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Built-in example model; also sets its default level r.
    #[arg(long, global = true)]
    model: Option<Builtin>,
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true)]
    r: Option<f64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true)]
    t_max_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Builtin {
    BirthDeath,
    Sis,
    PureBirth,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fluid path x_t up to level r.
    Fluid,
    /// Fluid hitting time by quadrature and by event location.
    Tau,
    /// CLT variance and moderate-deviation rate on the t-grid.
    Rate,
    /// Variance identity and variational self-consistency checks.
    Check,
    /// Exact jump-chain hitting times, one row per replica.
    Simulate,
    /// Diffusion-approximation hitting times, one row per replica.
    Diffusion {
        #[arg(long)]
        dt: Option<f64>,
        /// Disable the Brownian-bridge crossing test.
        #[arg(long)]
        no_bridge: bool,
    },
    /// Exact survival of a small chain against simulation.
    Oracle,
    /// Empirical moderate-deviation curve.
    Mdp,
    /// Central-limit summary of the hitting time.
    Clt,
    /// Jump chain against diffusion on the same curve.
    Compare,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fluid => "fluid",
            Command::Tau => "tau",
            Command::Rate => "rate",
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Diffusion { .. } => "diffusion",
            Command::Oracle => "oracle",
            Command::Mdp => "mdp",
            Command::Clt => "clt",
            Command::Compare => "compare",
        }
    }
}

fn builtin_table(b: Builtin) -> (toml::Value, f64) {
    let (model, r) = match b {
        Builtin::BirthDeath => (ddhit::ModelConfig::birth_death_example(), 2.0),
        Builtin::Sis => (ddhit::ModelConfig::sis_example(), 0.6),
        Builtin::PureBirth => (ddhit::ModelConfig::PureBirth { lambda: 1.0, x: 1.0 }, 2.0),
    };
    (toml::Value::try_from(model).expect("model serializes"), r)
}

/// File, then `--model`, then `--set`, then the dedicated flags.
fn load(cli: &Cli) -> Result<FileConfig, CliError> {
    let mut table = match &cli.config {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    if let Some(b) = cli.model {
        let (model, r) = builtin_table(b);
        table.insert("model".into(), model);
        set_path(&mut table, "experiment.r", r.into())?;
    }
    for s in &cli.set {
        apply_override(&mut table, s)?;
    }
    let mut flags: Vec<(&str, toml::Value)> = Vec::new();
    if let Some(v) = cli.seed {
        flags.push(("experiment.master_seed", toml_u64(v)?));
    }
    if let Some(v) = cli.n {
        flags.push(("experiment.n", toml_u64(v)?));
    }
    if let Some(v) = cli.r {
        flags.push(("experiment.r", v.into()));
    }
    if let Some(v) = cli.replicas {
        flags.push(("experiment.replicas", toml_u64(v)?));
    }
    if let Some(v) = cli.t_max_multiplier {
        flags.push(("experiment.t_max_multiplier", v.into()));
    }
    if let Command::Diffusion { dt, no_bridge } = &cli.command {
        if let Some(dt) = dt {
            flags.push(("diffusion.dt", (*dt).into()));
        }
        if *no_bridge {
            flags.push(("diffusion.bridge_correction", false.into()));
        }
    }
    for (k, v) in flags {
        set_path(&mut table, k, v)?;
    }
    resolve(table)
}

fn toml_u64(v: u64) -> Result<toml::Value, CliError> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| CliError::Config(format!("{v} exceeds the config integer range")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = match &cli.command {
        Command::Fluid => commands::fluid(&cfg),
        Command::Tau => commands::tau(&cfg),
        Command::Rate => commands::rate(&cfg),
        Command::Check => commands::check(&cfg),
        Command::Simulate => commands::simulate(&cfg, Engine::Ssa),
        Command::Diffusion { .. } => commands::simulate(&cfg, Engine::Diffusion),
        Command::Oracle => commands::oracle(&cfg),
        Command::Mdp => commands::mdp(&cfg),
        Command::Clt => commands::clt(&cfg),
        Command::Compare => commands::compare(&cfg),
    }?;
    output::write_all(&cli.out, cli.command.name(), &cfg, rayon::current_num_threads(), &out)?;
    print!("{}", out.report);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "error": {
                    "module": e.module(),
                    "kind": e.kind(),
                    "command": cli.command.name(),
                    "message": e.to_string(),
                }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
