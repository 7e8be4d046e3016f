//! Batch experiment driver: single alignment runs, Monte Carlo aggregation,
//! approximation diagnostics, and stream export.
//!
//! Determinism contract: every run draws its randomness from
//! `run_seed = mix_seed(mix_seed(base_seed, mode_salt), run_index)`, so runs
//! are independent of execution order and thread count, and aggregation
//! always sums in run-index order. Outputs are byte-identical for a fixed
//! (config, seed).

use crate::config::{CompensationMode, ConfigError, ExperimentConfig};
use inflight_align::alignment::{
    solve_attitude, AccumulatorOptions, AlignmentAccumulator, AlignmentError, ObservationPair,
};
use inflight_align::attitude::{attitude_error_angles, AttitudeErrors, Frame};
use inflight_align::csvio;
use inflight_align::earth::{EarthError, EarthKinematics};
use inflight_align::simkit::{
    apply_imu_errors, gen_trajectory, mix_seed, synthesize_gnss, synthesize_imu, SensorErrorModel,
    SimError,
};
use inflight_align::strapdown::{derive_rates, GnssInterpolator, StrapdownError};
use rayon::prelude::*;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run}: {source}")]
    Run {
        run: u32,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Strapdown(#[from] StrapdownError),
    #[error(transparent)]
    Earth(#[from] EarthError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error("degenerate geometry: no epoch produced a well-posed solution")]
    NoValidEpochs,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl HarnessError {
    pub fn is_degenerate(&self) -> bool {
        match self {
            HarnessError::NoValidEpochs => true,
            HarnessError::Alignment(AlignmentError::DegenerateGeometry { .. }) => true,
            HarnessError::Run { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }
}

// per-purpose salts for run-seed derivation (documented in the README)
fn mode_salt(mode: CompensationMode, zero_lever_baseline: bool) -> u64 {
    if zero_lever_baseline {
        return 4;
    }
    match mode {
        CompensationMode::None => 1,
        CompensationMode::Eq9 => 2,
        CompensationMode::Exact => 3,
    }
}

/// Seed for one run: `mix_seed(mix_seed(base, salt), run_index)`.
pub fn run_seed(base_seed: u64, salt: u64, run_index: u32) -> u64 {
    mix_seed(mix_seed(base_seed, salt), u64::from(run_index))
}

/// Attitude-error series of one alignment run, one entry per GNSS epoch.
/// `None` marks epochs where the pair geometry was still degenerate.
#[derive(Clone, Debug)]
pub struct RunSeries {
    pub epochs: Vec<f64>,
    pub errors: Vec<Option<AttitudeErrors>>,
    pub pairs: Vec<ObservationPair>,
}

impl RunSeries {
    pub fn has_solution(&self) -> bool {
        self.errors.iter().any(|e| e.is_some())
    }
}

/// One experiment arm: a compensation mode plus an optional zero-lever
/// override of the truth (the Monte Carlo baseline).
#[derive(Clone, Copy, Debug)]
pub struct Arm {
    pub mode: CompensationMode,
    pub zero_lever: bool,
}

impl Arm {
    pub fn label(&self) -> &'static str {
        if self.zero_lever {
            "zero_lever"
        } else {
            self.mode.tag()
        }
    }
}

/// Run one alignment end to end and record per-epoch attitude errors.
pub fn run_single(
    cfg: &ExperimentConfig,
    arm: Arm,
    run_index: u32,
) -> Result<RunSeries, HarnessError> {
    let seed = run_seed(cfg.base_seed, mode_salt(arm.mode, arm.zero_lever), run_index);
    let model = cfg.sensor_model(seed);

    let profile = cfg.trajectory_profile()?;
    let truth = gen_trajectory(&profile, cfg.imu_dt)?;
    let imu_perfect = synthesize_imu(&truth)?;
    let imu = apply_imu_errors(&imu_perfect, &model)?;

    let lever_truth = if arm.zero_lever {
        inflight_align::alignment::LeverArm::zero()
    } else {
        cfg.lever_truth()?
    };
    let gnss = synthesize_gnss(&truth, &lever_truth, &model, cfg.gnss_dt)?;
    let itp = GnssInterpolator::new(&gnss)?;

    let lever_assumed = match arm.mode {
        CompensationMode::None => inflight_align::alignment::LeverArm::zero(),
        _ if arm.zero_lever => inflight_align::alignment::LeverArm::zero(),
        _ => cfg.lever_assumed()?,
    };
    let mut opts = AccumulatorOptions::new(cfg.imu_dt);
    opts.settle_window = cfg.settle_window;
    opts.coning = cfg.coning;
    opts.weighting = cfg.weighting();
    let mut acc = AlignmentAccumulator::new(lever_assumed, opts);

    let c_true0 = truth[0].c_b_n.retagged(Frame::Body0, Frame::Nav0);
    let stride = (cfg.gnss_dt / cfg.imu_dt).round() as usize;
    let last = ((cfg.horizon / cfg.imu_dt).round() as usize).min(imu.len() - 1);

    let mut series = RunSeries {
        epochs: Vec::new(),
        errors: Vec::new(),
        pairs: Vec::new(),
    };
    for k in 0..=last {
        let sample = &imu[k];
        let (pos, vel) = itp.sample_at(sample.t)?;
        let earth = EarthKinematics::at(&pos, &vel)?;
        let rates;
        let truth_rates = if arm.mode == CompensationMode::Exact {
            rates = derive_rates(
                &truth[k].c_b_n,
                &imu_perfect[k].omega_ib_b,
                &truth[k].pos,
                &truth[k].v_n,
            )?;
            Some(&rates)
        } else {
            None
        };
        acc.push(sample, &vel, &earth, truth_rates)?;

        if k % stride == 0 {
            let pair = match arm.mode {
                CompensationMode::Exact => acc.emit_pair_exact(sample.t)?,
                _ => acc.emit_pair(sample.t)?,
            };
            series.pairs.push(pair);
            let window = if cfg.solver_window == 0 {
                &series.pairs[..]
            } else {
                let start = series.pairs.len().saturating_sub(cfg.solver_window);
                &series.pairs[start..]
            };
            let err = match solve_attitude(window) {
                Ok(sol) => Some(attitude_error_angles(&sol.c_b_n0, &c_true0)),
                Err(AlignmentError::DegenerateGeometry { .. })
                | Err(AlignmentError::NoObservations)
                | Err(AlignmentError::InvalidWeights) => None,
                Err(e) => return Err(e.into()),
            };
            series.epochs.push(sample.t);
            series.errors.push(err);
        }
    }
    if !series.has_solution() {
        return Err(HarnessError::NoValidEpochs);
    }
    Ok(series)
}

/// Mean error curve over runs: one row per epoch from the first epoch where
/// every run has a solution.
#[derive(Clone, Debug)]
pub struct ErrorCurve {
    pub label: String,
    pub epochs: Vec<f64>,
    /// Mean signed errors [deg]: (pitch, roll, yaw) per epoch.
    pub mean_deg: Vec<[f64; 3]>,
    pub n_runs: usize,
}

impl ErrorCurve {
    fn aggregate(label: &str, runs: &[RunSeries]) -> Result<Self, HarnessError> {
        let n_epochs = runs[0].epochs.len();
        debug_assert!(runs.iter().all(|r| r.epochs.len() == n_epochs));
        // first epoch index where all runs have a solution
        let start = (0..n_epochs)
            .find(|&i| runs.iter().all(|r| r.errors[i].is_some()))
            .ok_or(HarnessError::NoValidEpochs)?;
        let mut epochs = Vec::with_capacity(n_epochs - start);
        let mut mean_deg = Vec::with_capacity(n_epochs - start);
        for i in start..n_epochs {
            let mut acc = [0.0f64; 3];
            for r in runs {
                // epochs past `start` may only be missing if geometry
                // re-degenerated, which the windowless solver cannot do
                let e = r.errors[i].ok_or(HarnessError::NoValidEpochs)?;
                acc[0] += e.pitch;
                acc[1] += e.roll;
                acc[2] += e.yaw;
            }
            let n = runs.len() as f64;
            epochs.push(runs[0].epochs[i]);
            mean_deg.push([
                (acc[0] / n).to_degrees(),
                (acc[1] / n).to_degrees(),
                (acc[2] / n).to_degrees(),
            ]);
        }
        Ok(Self {
            label: label.to_string(),
            epochs,
            mean_deg,
            n_runs: runs.len(),
        })
    }

    /// Schema: `epoch,pitch_err_deg,roll_err_deg,yaw_err_deg,n_runs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,pitch_err_deg,roll_err_deg,yaw_err_deg,n_runs\n");
        for (t, m) in self.epochs.iter().zip(&self.mean_deg) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csvio::fmt_f64(*t),
                csvio::fmt_f64(m[0]),
                csvio::fmt_f64(m[1]),
                csvio::fmt_f64(m[2]),
                self.n_runs
            ));
        }
        out
    }

    pub fn peak_abs_yaw_deg(&self) -> f64 {
        self.mean_deg.iter().map(|m| m[2].abs()).fold(0.0, f64::max)
    }

    pub fn final_abs_deg(&self) -> [f64; 3] {
        let m = self.mean_deg.last().expect("non-empty curve");
        [m[0].abs(), m[1].abs(), m[2].abs()]
    }
}

/// The three-arm Monte Carlo experiment: lever arm compensated (eq9),
/// uncompensated (none), and the zero-lever-arm baseline.
pub struct MonteCarloOutput {
    pub compensated: ErrorCurve,
    pub uncompensated: ErrorCurve,
    pub zero_lever: ErrorCurve,
}

impl MonteCarloOutput {
    pub fn curves(&self) -> [&ErrorCurve; 3] {
        [&self.compensated, &self.uncompensated, &self.zero_lever]
    }
}

fn run_arm(cfg: &ExperimentConfig, arm: Arm, threads: usize) -> Result<ErrorCurve, HarnessError> {
    let indices: Vec<u32> = (0..cfg.run_count).collect();
    let run_one = |&i: &u32| {
        run_single(cfg, arm, i).map_err(|e| HarnessError::Run {
            run: i,
            source: Box::new(e),
        })
    };
    let runs: Vec<RunSeries> = if threads <= 1 {
        indices.iter().map(run_one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
        pool.install(|| {
            indices
                .par_iter()
                .map(run_one)
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    ErrorCurve::aggregate(arm.label(), &runs)
}

/// Run the three-arm Monte Carlo experiment.
pub fn run_monte_carlo(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<MonteCarloOutput, HarnessError> {
    let compensated = run_arm(
        cfg,
        Arm {
            mode: CompensationMode::Eq9,
            zero_lever: false,
        },
        threads,
    )?;
    let uncompensated = run_arm(
        cfg,
        Arm {
            mode: CompensationMode::None,
            zero_lever: false,
        },
        threads,
    )?;
    let zero_lever = run_arm(
        cfg,
        Arm {
            mode: CompensationMode::None,
            zero_lever: true,
        },
        threads,
    )?;
    Ok(MonteCarloOutput {
        compensated,
        uncompensated,
        zero_lever,
    })
}

/// Per-epoch approximation diagnostics from a noise-free truth-fed run.
pub struct RemarksReport {
    pub epochs: Vec<f64>,
    pub approx_ratio: Vec<f64>,
    pub force_integral: Vec<f64>,
    pub lever_coeff: Vec<f64>,
    pub beta_rel_gap: Vec<f64>,
}

impl RemarksReport {
    /// Schema: `epoch,approx_ratio,force_integral_mps,lever_coeff_mps,
    /// beta_rel_gap`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("epoch,approx_ratio,force_integral_mps,lever_coeff_mps,beta_rel_gap\n");
        for i in 0..self.epochs.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csvio::fmt_f64(self.epochs[i]),
                csvio::fmt_f64(self.approx_ratio[i]),
                csvio::fmt_f64(self.force_integral[i]),
                csvio::fmt_f64(self.lever_coeff[i]),
                csvio::fmt_f64(self.beta_rel_gap[i]),
            ));
        }
        out
    }
}

/// Noise-free truth-fed diagnostic run for the approximation-quality and
/// term-growth measurements.
pub fn report_remarks(cfg: &ExperimentConfig) -> Result<RemarksReport, HarnessError> {
    let profile = cfg.trajectory_profile()?;
    let truth = gen_trajectory(&profile, cfg.imu_dt)?;
    let imu = synthesize_imu(&truth)?;
    let lever = cfg.lever_truth()?;
    let gnss = synthesize_gnss(&truth, &lever, &SensorErrorModel::zero(0), cfg.gnss_dt)?;
    let itp = GnssInterpolator::new(&gnss)?;

    let mut opts = AccumulatorOptions::new(cfg.imu_dt);
    opts.settle_window = cfg.settle_window;
    opts.coning = cfg.coning;
    let mut acc = AlignmentAccumulator::new(lever, opts);

    let stride = (cfg.gnss_dt / cfg.imu_dt).round() as usize;
    let last = ((cfg.horizon / cfg.imu_dt).round() as usize).min(imu.len() - 1);
    let mut report = RemarksReport {
        epochs: Vec::new(),
        approx_ratio: Vec::new(),
        force_integral: Vec::new(),
        lever_coeff: Vec::new(),
        beta_rel_gap: Vec::new(),
    };
    for k in 0..=last {
        let sample = &imu[k];
        let (_, vel) = itp.sample_at(sample.t)?;
        // exact-oracle diagnostics integrate against truth earth kinematics
        let earth = EarthKinematics::at(&truth[k].pos, &truth[k].v_n)?;
        let rates = derive_rates(&truth[k].c_b_n, &sample.omega_ib_b, &truth[k].pos, &truth[k].v_n)?;
        acc.push(sample, &vel, &earth, Some(&rates))?;
        if k % stride == 0 {
            let (force, lever_mag) = acc.lever_term_growth();
            let exact = acc.emit_pair_exact(sample.t)?;
            let approx = acc.emit_pair(sample.t)?;
            let exact_norm = exact.beta.vector().norm();
            let gap = (exact.beta.vector() - approx.beta.vector()).norm();
            report.epochs.push(sample.t);
            report.approx_ratio.push(acc.approximation_ratio()?);
            report.force_integral.push(force);
            report.lever_coeff.push(lever_mag);
            report
                .beta_rel_gap
                .push(if exact_norm > 0.0 { gap / exact_norm } else { 0.0 });
        }
    }
    Ok(report)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    let io_err = |source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    let mut f = std::fs::File::create(&path).map_err(io_err)?;
    f.write_all(contents.as_bytes()).map_err(io_err)?;
    Ok(path)
}

/// Write the per-arm Monte Carlo CSVs, the effective config, and the plot
/// script. Returns the written paths.
pub fn write_monte_carlo_outputs(
    cfg: &ExperimentConfig,
    out: &MonteCarloOutput,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    for curve in out.curves() {
        written.push(write_file(
            dir,
            &format!("errors_{}.csv", curve.label),
            &curve.to_csv(),
        )?);
    }
    written.push(write_file(dir, "effective_config.toml", &cfg.effective_toml())?);
    written.push(write_file(dir, "plot_errors.py", PLOT_SCRIPT)?);
    Ok(written)
}

pub fn write_single_run_outputs(
    cfg: &ExperimentConfig,
    arm: Arm,
    series: &RunSeries,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut csv = String::from("epoch,pitch_err_deg,roll_err_deg,yaw_err_deg\n");
    for (t, err) in series.epochs.iter().zip(&series.errors) {
        if let Some(e) = err {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                csvio::fmt_f64(*t),
                csvio::fmt_f64(e.pitch.to_degrees()),
                csvio::fmt_f64(e.roll.to_degrees()),
                csvio::fmt_f64(e.yaw.to_degrees()),
            ));
        }
    }
    let mut written = vec![write_file(dir, &format!("run_{}.csv", arm.label()), &csv)?];
    written.push(write_file(
        dir,
        &format!("pairs_{}.csv", arm.label()),
        &csvio::pairs_to_csv(&series.pairs),
    )?);
    written.push(write_file(dir, "effective_config.toml", &cfg.effective_toml())?);
    Ok(written)
}

/// Export truth/IMU/GNSS streams for run 0 of the configured experiment.
pub fn export_streams(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let seed = run_seed(cfg.base_seed, mode_salt(cfg.mode, false), 0);
    let model = cfg.sensor_model(seed);
    let profile = cfg.trajectory_profile()?;
    let truth = gen_trajectory(&profile, cfg.imu_dt)?;
    let imu = apply_imu_errors(&synthesize_imu(&truth)?, &model)?;
    let gnss = synthesize_gnss(&truth, &cfg.lever_truth()?, &model, cfg.gnss_dt)?;
    let mut written = vec![write_file(dir, "truth.csv", &csvio::truth_to_csv(&truth))?];
    written.push(write_file(dir, "imu.csv", &csvio::imu_to_csv(&imu))?);
    written.push(write_file(dir, "gnss.csv", &csvio::gnss_to_csv(&gnss))?);
    written.push(write_file(dir, "effective_config.toml", &cfg.effective_toml())?);
    Ok(written)
}

pub fn write_remarks_outputs(
    cfg: &ExperimentConfig,
    report: &RemarksReport,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = vec![write_file(dir, "remarks.csv", &report.to_csv())?];
    written.push(write_file(dir, "effective_config.toml", &cfg.effective_toml())?);
    Ok(written)
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Overlay the Monte Carlo mean alignment-error curves.

Reads errors_eq9.csv, errors_none.csv and errors_zero_lever.csv from this
script's directory and plots mean pitch/roll/yaw errors per epoch.
"""
import csv
import os
import sys

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
ARMS = [
    ("errors_eq9.csv", "lever arm compensated", "tab:blue"),
    ("errors_none.csv", "uncompensated", "tab:red"),
    ("errors_zero_lever.csv", "zero lever arm", "tab:green"),
]
ANGLES = [("pitch_err_deg", "pitch error [deg]"),
          ("roll_err_deg", "roll error [deg]"),
          ("yaw_err_deg", "yaw error [deg]")]


def load(name):
    path = os.path.join(HERE, name)
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return rows


def main():
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 9))
    for name, label, color in ARMS:
        try:
            rows = load(name)
        except FileNotFoundError:
            print(f"missing {name}, skipping", file=sys.stderr)
            continue
        t = [float(r["epoch"]) for r in rows]
        for ax, (col, _) in zip(axes, ANGLES):
            ax.plot(t, [float(r[col]) for r in rows], label=label, color=color)
    for ax, (_, ylabel) in zip(axes, ANGLES):
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    axes[0].legend()
    axes[-1].set_xlabel("time [s]")
    fig.suptitle("Mean alignment errors across Monte Carlo runs")
    out = os.path.join(HERE, "errors.png")
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
"#;
