//! Command-line driver for the in-motion coarse-alignment experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate-geometry
//! failure (no epoch produced a well-posed attitude), 1 anything else.

use clap::{Parser, Subcommand};
use inflight_align_cli::config::{self, CompensationMode, ExperimentConfig};
use inflight_align_cli::harness::{self, Arm, HarnessError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "inflight-align",
    about = "In-motion coarse alignment experiments with GNSS lever-arm compensation",
    version
)]
struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Override the compensation mode (none|eq9|exact).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Override the Monte Carlo run count.
    #[arg(long, global = true)]
    runs: Option<u32>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single alignment run: per-epoch attitude errors and observation pairs.
    Run {
        /// Run index (selects the derived seed).
        #[arg(long, default_value_t = 0)]
        run_index: u32,
    },
    /// Three-arm Monte Carlo experiment (compensated, uncompensated,
    /// zero-lever baseline) with mean error curves.
    Montecarlo,
    /// Approximation-quality and term-growth diagnostics from a noise-free
    /// truth-fed run.
    Remarks,
    /// Export truth/IMU/GNSS streams as CSV.
    ExportStreams,
}

fn parse_mode(s: &str) -> Result<CompensationMode, config::ConfigError> {
    match s {
        "none" => Ok(CompensationMode::None),
        "eq9" => Ok(CompensationMode::Eq9),
        "exact" => Ok(CompensationMode::Exact),
        other => Err(config::ConfigError::Invalid {
            key: "mode",
            reason: format!("expected none|eq9|exact, got `{other}`"),
        }),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, config::ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = parse_mode(mode)?;
    }
    if let Some(runs) = cli.runs {
        cfg.run_count = runs;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = load_config(cli)?;
    let dir = PathBuf::from(&cfg.out_dir);
    match cli.command {
        Command::Run { run_index } => {
            let arm = Arm {
                mode: cfg.mode,
                zero_lever: false,
            };
            let series = harness::run_single(&cfg, arm, run_index)?;
            let written = harness::write_single_run_outputs(&cfg, arm, &series, &dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Montecarlo => {
            let out = harness::run_monte_carlo(&cfg, cfg.threads)?;
            let written = harness::write_monte_carlo_outputs(&cfg, &out, &dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
            for curve in out.curves() {
                let f = curve.final_abs_deg();
                println!(
                    "{}: {} runs, peak |mean yaw| {:.4} deg, final |mean| p/r/y {:.4}/{:.4}/{:.4} deg",
                    curve.label,
                    curve.n_runs,
                    curve.peak_abs_yaw_deg(),
                    f[0],
                    f[1],
                    f[2]
                );
            }
        }
        Command::Remarks => {
            let report = harness::report_remarks(&cfg)?;
            let written = harness::write_remarks_outputs(&cfg, &report, &dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::ExportStreams => {
            let written = harness::export_streams(&cfg, &dir)?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if matches!(e, HarnessError::Config(_)) {
                ExitCode::from(2)
            } else if e.is_degenerate() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
