//! `ruelle`: run the toolkit from a JSON configuration.
//!
//! Exit codes: 0 success, 2 invalid input (nothing written), 3 convergence
//! failure (manifest plus residual history written), 1 output I/O errors.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::RunConfig;
use ruelle::seqspace::fmt_f64;

#[derive(Parser, Debug)]
#[command(name = "ruelle", version, about = "Thermodynamic formalism on shift spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, env = "RUELLE_OUT_DIR")]
    out: Option<PathBuf>,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Perron eigen-triple and spectral-gap estimate.
    Eigen,
    /// Pressure `log λ`.
    Pressure,
    /// Equilibrium state and variational report.
    Equilibrium,
    /// Equilibrium states of `βf` along a β list.
    Betascan,
    /// Simulate one chain of the normalized kernel.
    MarkovSim,
    /// Geometric-ergodicity fit and operator contraction.
    Ergodicity,
    /// Long-run variance and KS test of Birkhoff sums.
    Clt,
    /// Pressure along the segment between two potentials.
    Convexity,
    /// Hausdorff distances, path potential and Monte Carlo operator.
    PathsDemo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Pressure => "pressure",
            Command::Equilibrium => "equilibrium",
            Command::Betascan => "betascan",
            Command::MarkovSim => "markov-sim",
            Command::Ergodicity => "ergodicity",
            Command::Clt => "clt",
            Command::Convexity => "convexity",
            Command::PathsDemo => "paths-demo",
        }
    }
}

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Convergence { message: String, history: Vec<f64> },
    Io(String),
}

impl From<ruelle::Error> for Failure {
    fn from(e: ruelle::Error) -> Self {
        match e {
            ruelle::Error::Convergence { ref history, .. } => Failure::Convergence {
                history: history.clone(),
                message: e.to_string(),
            },
            ruelle::Error::Residual { .. } => Failure::Convergence {
                message: e.to_string(),
                history: Vec::new(),
            },
            other => Failure::Validation(other.to_string()),
        }
    }
}

/// Results of a successful command: manifest fields and CSV sidecars.
pub struct Outcome {
    pub results: serde_json::Value,
    pub files: Vec<(String, String)>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Convergence { message, .. }) => {
            eprintln!("convergence failure: {message}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Validation("--config PATH is required".into()))?;
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| Failure::Validation("--out DIR or RUELLE_OUT_DIR is required".into()))?;
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Validation(format!("cannot set thread count: {e}")))?;
    }
    let config = RunConfig::load(config_path)?.resolve(cli.seed)?;
    let command = cli.command;
    match commands::run(command, &config) {
        Ok(outcome) => write_outputs(out, command, &config, "ok", outcome),
        Err(Failure::Convergence { message, history }) => {
            let mut csv = String::from("iteration,bracket_width\n");
            for (k, w) in history.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", k + 1, fmt_f64(*w)));
            }
            let outcome = Outcome {
                results: json!({ "error": message }),
                files: vec![("residual_history.csv".into(), csv)],
            };
            write_outputs(out, command, &config, "convergence_failure", outcome)?;
            Err(Failure::Convergence { message, history })
        }
        Err(e) => Err(e),
    }
}

fn write_outputs(out: &Path, command: Command, config: &RunConfig, status: &str, outcome: Outcome) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let files: Vec<&str> = outcome.files.iter().map(|f| f.0.as_str()).collect();
    let manifest = json!({
        "tool": "ruelle",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "status": status,
        "config": config,
        "results": outcome.results,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))? + "\n";
    std::fs::write(out.join("manifest.json"), text).map_err(io)?;
    for (name, contents) in &outcome.files {
        std::fs::write(out.join(name), contents).map_err(io)?;
    }
    Ok(())
}
