//! Experiment runner binary.
//!
//! Thin front-end over [`nsdde::cli`]: each subcommand loads one TOML config,
//! checks the config's `mode` agrees with the subcommand, runs it, and prints
//! a provenance block on stdout. All experiment outputs go to files under the
//! config's `output_dir`; stdout is the only place run-dependent information
//! (wall-clock) appears, so output files stay byte-reproducible.
//!
//! Errors leave as JSON on stderr (`{"error": id, "message": ...}`) with exit
//! status 1.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use nsdde::cli::{self, Mode, RunConfig};
use nsdde::error::Error;

#[derive(Parser)]
#[command(name = "nsdde", version, about = "Tamed Euler-Maruyama experiments for neutral stochastic delay systems")]
struct Args {
    /// Worker threads for the path loop; never affects output bytes.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and write one CSV per path.
    Simulate {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Strong-error sweep across step sizes (CSV + JSON report).
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Moment sweep across step sizes (CSV + JSON report).
    Moments {
        #[arg(long)]
        config: PathBuf,
    },
    /// Audit a problem's declared constants (JSON report).
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Simulate { .. } => Mode::Simulate,
            Command::Converge { .. } => Mode::Converge,
            Command::Moments { .. } => Mode::Moments,
            Command::Check { .. } => Mode::Check,
        }
    }

    fn config(&self) -> &PathBuf {
        match self {
            Command::Simulate { config }
            | Command::Converge { config }
            | Command::Moments { config }
            | Command::Check { config } => config,
        }
    }
}

fn load_matching_config(args: &Args) -> Result<RunConfig, Error> {
    let cfg = cli::load_config(args.command.config())?;
    let expected = args.command.mode();
    if cfg.mode != expected {
        return Err(Error::Config(format!(
            "config declares mode \"{}\" but the {} subcommand was invoked",
            cfg.mode.as_str(),
            expected.as_str()
        )));
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<serde_json::Value, Error> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let cfg = load_matching_config(args)?;
    let start = Instant::now();
    let summary = cli::run(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    Ok(serde_json::json!({
        "provenance": {
            "config": cfg,
            "base_seed": cfg.base_seed,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_clock_seconds": wall,
        },
        "summary": summary,
    }))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(block) => {
            println!("{}", serde_json::to_string_pretty(&block).expect("valid json"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let payload = serde_json::json!({ "error": e.id(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
