//! Command-line entry point.
//!
//! Exit codes: 0 all assertions pass, 1 assertion failure, 2 usage or
//! config error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flowlab::cli::{preset, run_experiment, ExperimentConfig, PRESET_NAMES};
use flowlab::Error;

#[derive(Parser)]
#[command(
    name = "flowlab",
    about = "Numerical laboratory for gradient flows with branching equilibria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and CSV artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a named preset experiment.
    Preset {
        /// Preset name; see `list-presets`.
        name: String,
        /// Output directory for report.json and CSV artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the available preset names.
    ListPresets,
}

fn execute(config: ExperimentConfig, out: Option<PathBuf>) -> ExitCode {
    let out_dir = out.unwrap_or_else(|| PathBuf::from("runs").join(&config.id));
    match run_experiment(&config, &out_dir) {
        Ok(report) => {
            for a in &report.assertions {
                println!(
                    "{} {}: measured {:.6e} (expected {:.6e}, tol {:.1e})",
                    if a.passed { "PASS" } else { "FAIL" },
                    a.name,
                    a.measured,
                    a.expected,
                    a.tolerance
                );
            }
            println!(
                "{}: {} ({} ms) -> {}",
                report.experiment_id,
                report.status,
                report.wall_ms,
                out_dir.join("report.json").display()
            );
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("runtime error in '{}': {e}", config.id);
            ExitCode::from(3)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, seed } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg: ExperimentConfig = match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!(
                        "config parse error in {} (line {}, column {}): {e}",
                        config.display(),
                        e.line(),
                        e.column()
                    );
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            execute(cfg, out)
        }
        Command::Preset { name, out } => match preset(&name) {
            Ok(cfg) => execute(cfg, out),
            Err(e) => {
                eprintln!("{e}; available: {}", PRESET_NAMES.join(", "));
                ExitCode::from(2)
            }
        },
        Command::ListPresets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
