//! `erw`: command-line runner for excited random walk experiments.
//!
//! Exit codes: 0 success, 1 validation error, 2 property violation,
//! 3 insufficient regenerations.

mod commands;
mod config;
mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Format};
use report::Failure;

#[derive(Parser)]
#[command(
    name = "erw",
    version,
    about = "Excited random walk coupling, speed and oracle runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file, or an inline JSON object.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    guard: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Transience and speed diagnostics of the environment.
    Classify,
    /// Path-wise coupling checks over Monte Carlo samples and the exact joint law.
    Check {
        /// Flip one arrow of the first replica; the run must then report a violation.
        #[arg(long)]
        negative_control: bool,
        /// Re-run a single replica, e.g. one named in a violation report.
        #[arg(long)]
        replica: Option<u64>,
    },
    /// Naive, regeneration and (with a kernel) paired speed estimates.
    Speed,
    /// Exact small-horizon laws and dominance comparisons.
    Oracle,
    /// Diagnostics, and optionally speeds, over a grid of environments.
    Sweep,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(src) => ExperimentConfig::load(src)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replicas {
            cfg.replicas = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.guard {
            cfg.guard = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            cfg.format = Some(v);
        }
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ERW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Validation(format!(
            "ERW_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Validation(e.to_string()))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    let cfg = cli.config()?;
    let (report, default_format) = match &cli.command {
        Command::Classify => (commands::classify(&cfg)?, Format::Json),
        Command::Check {
            negative_control,
            replica,
        } => (
            commands::check(&cfg, *negative_control, *replica)?,
            Format::Json,
        ),
        Command::Speed => (commands::speed(&cfg)?, Format::Json),
        Command::Oracle => (commands::oracle(&cfg)?, Format::Json),
        Command::Sweep => (commands::sweep(&cfg)?, Format::Csv),
    };
    let format = cfg.format.unwrap_or(default_format);
    let written = match &cfg.out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report.write(format, &mut w)?;
            w.flush()
        }),
        None => {
            let mut out = std::io::stdout().lock();
            report.write(format, &mut out)
        }
    };
    written.map_err(|e| Failure::Validation(format!("cannot write output: {e}")))?;
    match report.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
