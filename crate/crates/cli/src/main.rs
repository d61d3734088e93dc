//! `chainstress` command-line driver.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Run;
use crate::config::RunConfig;
use crate::manifest::{Manifest, Status};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "chainstress", version, about = "Supply-chain and interbank contagion stress tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Scenario worker threads (default: available parallelism; 1 runs sequentially).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory (default: ./out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master RNG seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Regimes to run: with supply-chain contagion, without, or both.
    #[arg(long, global = true, value_enum)]
    regime: Option<RegimeArg>,

    /// Dump per-iteration trajectories and default flags.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Check an economy against the model invariants.
    Validate,
    /// Write a synthetic economy and an empirical shock table.
    Generate,
    /// FSRI and FSRI+ of every firm.
    Fsri,
    /// Run a scenario batch through the full pipeline.
    Stress,
    /// Interbank contagion profile and Gaussian bank-shock study.
    Debtrank,
    /// Recompute statistics from a dumped ledgers.csv.
    Report {
        /// Ledgers file (overrides `[report] ledgers`).
        ledgers: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Generate => "generate",
            Command::Fsri => "fsri",
            Command::Stress => "stress",
            Command::Debtrank => "debtrank",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    W,
    Wo,
    Both,
}

impl From<RegimeArg> for chainstress::Regimes {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::W => chainstress::Regimes::W,
            RegimeArg::Wo => chainstress::Regimes::Wo,
            RegimeArg::Both => chainstress::Regimes::Both,
        }
    }
}

/// Maps an error to the documented exit status.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<chainstress::Error>() {
            return match e {
                chainstress::Error::Io { .. } => EXIT_IO,
                chainstress::Error::Csv { source, .. } if source.is_io_error() => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.regime {
        cfg.regime = r.into();
    }
    cfg.trace |= cli.trace;
    cfg.check()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<u8> {
    let cfg = load_config(&cli)?;
    let mut run = Run::new(cfg);
    let result = match &cli.command {
        Command::Validate => commands::validate(&mut run),
        Command::Generate => commands::generate(&mut run),
        Command::Fsri => commands::fsri(&mut run),
        Command::Stress => commands::stress(&mut run),
        Command::Debtrank => commands::debtrank(&mut run),
        Command::Report { ledgers } => commands::report(&mut run, ledgers.clone()),
    };

    let (status, code) = match &result {
        Err(e) if exit_code(e) == EXIT_VALIDATION => (Status::Invalid, EXIT_VALIDATION),
        Err(e) => (Status::Failed, exit_code(e)),
        Ok(()) if run.invalid => (Status::Invalid, EXIT_VALIDATION),
        Ok(()) if run.convergence.as_ref().is_some_and(|c| !c.all()) => (Status::NotConverged, EXIT_CONVERGENCE),
        Ok(()) => (Status::Ok, 0),
    };

    // `validate` only reports to stdout unless an output directory is asked for.
    let wants_manifest = !matches!(cli.command, Command::Validate) || run.cfg.out.is_some();
    if wants_manifest {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            engine_version: chainstress::VERSION,
            command: cli.command.name(),
            status,
            partial: result.is_err(),
            error: result.as_ref().err().map(|e| format!("{e:#}")),
            parallel: run.runner.is_parallel(),
            seeds: run.seeds,
            config: &run.cfg,
            inputs: &run.inputs,
            outputs: &run.outputs,
            convergence: run.convergence.as_ref(),
        };
        if let Err(e) = std::fs::create_dir_all(&run.out).map_err(anyhow::Error::from).and_then(|_| manifest.write(&run.out)) {
            log::error!("could not write manifest: {e:#}");
        }
    }

    if let Some(c) = run.convergence.as_ref().filter(|c| !c.all()) {
        log::warn!("{} of {} scenarios did not converge", c.not_converged.len(), c.scenarios);
    }
    result.map(|()| code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
