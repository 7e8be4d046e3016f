//! Acceptance suite: one test per release criterion, each printing a
//! `ACCEPTANCE <n> ...: PASS` line (visible with `--nocapture`).
//!
//! Run with `cargo test -p inflight-align-cli --test acceptance -- --nocapture`.

#![allow(clippy::field_reassign_with_default)]
#![allow(clippy::needless_range_loop)]

use inflight_align::alignment::{
    solve_attitude, AccumulatorOptions, AlignmentAccumulator, AlignmentError, LeverArm,
    ObservationPair,
};
use inflight_align::attitude::{attitude_error_angles, Frame, FrameVector, UnitQuaternion};
use inflight_align::earth::EarthKinematics;
use inflight_align::simkit::{
    gen_trajectory, synthesize_gnss, synthesize_imu, SensorErrorModel,
};
use inflight_align::strapdown::{
    derive_rates, propagate_body_chain, AttitudeChainState, GnssInterpolator,
};
use inflight_align_cli::config::ExperimentConfig;
use inflight_align_cli::harness::{run_monte_carlo, report_remarks};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Noise-free identity run on the default maneuver: GNSS at the IMU rate and
/// truth-derived earth kinematics, so the residual is pure quadrature.
/// Returns the max exact-form residual over the 1 Hz epochs of [1, 600] s.
fn identity_max_residual(dt: f64) -> f64 {
    let mut cfg = ExperimentConfig::default();
    cfg.horizon = 600.0;
    cfg.imu_dt = dt;
    cfg.gnss_dt = dt;
    let profile = cfg.trajectory_profile().unwrap();
    let lever = cfg.lever_truth().unwrap();
    let truth = gen_trajectory(&profile, dt).unwrap();
    let imu = synthesize_imu(&truth).unwrap();
    let gnss = synthesize_gnss(&truth, &lever, &SensorErrorModel::zero(0), dt).unwrap();
    let itp = GnssInterpolator::new(&gnss).unwrap();

    let mut opts = AccumulatorOptions::new(dt);
    opts.settle_window = cfg.settle_window;
    let mut acc = AlignmentAccumulator::new(lever, opts);
    let c0 = truth[0].c_b_n.retagged(Frame::Body0, Frame::Nav0);

    let stride = (1.0 / dt).round() as usize;
    let last = (600.0 / dt).round() as usize;
    let mut max_res = 0.0f64;
    for k in 0..=last {
        let s = &imu[k];
        let (_, vel) = itp.sample_at(s.t).unwrap();
        let earth = EarthKinematics::at(&truth[k].pos, &truth[k].v_n).unwrap();
        let rates =
            derive_rates(&truth[k].c_b_n, &s.omega_ib_b, &truth[k].pos, &truth[k].v_n).unwrap();
        acc.push(s, &vel, &earth, Some(&rates)).unwrap();
        if k % stride == 0 && k >= stride {
            let p = acc.emit_pair_exact(s.t).unwrap();
            let r = (p.alpha.vector() - c0.matrix() * p.beta.vector()).norm();
            max_res = max_res.max(r);
        }
    }
    max_res
}

#[test]
fn acceptance_1_velocity_integration_identity() {
    let start = Instant::now();
    let coarse = identity_max_residual(0.01);
    let halved = identity_max_residual(0.005);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        coarse < 1e-3,
        "identity residual {coarse} m/s exceeds 1e-3 at 100 Hz"
    );
    let shrink = coarse / halved;
    assert!(
        shrink >= 3.5,
        "halving dt shrank the residual by {shrink:.2}x (< 3.5x): {coarse} -> {halved}"
    );
    assert!(elapsed < 10.0, "identity check took {elapsed:.1} s (>= 10 s)");
    println!(
        "ACCEPTANCE 1 (velocity-integration identity): PASS \
         (max residual {coarse:.3e} m/s, dt-halving shrink {shrink:.2}x, {elapsed:.2} s)"
    );
}

#[test]
fn acceptance_2_zero_lever_reduction() {
    // with l = 0, beta must be bit-identical to the plain velocity
    // integration (no lever term evaluated at all); the reference integral
    // is re-accumulated here with the same trapezoid arithmetic
    let dt = 0.01;
    let mut cfg = ExperimentConfig::default();
    cfg.horizon = 30.0;
    cfg.gnss_dt = dt;
    cfg.imu_dt = dt;
    let profile = cfg.trajectory_profile().unwrap();
    let truth = gen_trajectory(&profile, dt).unwrap();
    let imu = synthesize_imu(&truth).unwrap();
    let gnss = synthesize_gnss(&truth, &LeverArm::zero(), &SensorErrorModel::zero(0), dt).unwrap();
    let itp = GnssInterpolator::new(&gnss).unwrap();

    let mut acc = AlignmentAccumulator::new(LeverArm::zero(), AccumulatorOptions::new(dt));
    let mut i_fv = nalgebra::Vector3::<f64>::zeros();
    let mut prev_fv: Option<(f64, nalgebra::Vector3<f64>)> = None;
    let mut checked = 0usize;
    let last = (30.0 / dt).round() as usize;
    for k in 0..=last {
        let s = &imu[k];
        let (pos, vel) = itp.sample_at(s.t).unwrap();
        let earth = EarthKinematics::at(&pos, &vel).unwrap();
        acc.push(s, &vel, &earth, None).unwrap();
        // lever-term-free reference, mirrored trapezoid on the sample times
        let fv = acc.chain().c_bt_b0().matrix() * s.f_b.vector();
        if let Some((prev_t, prev)) = prev_fv {
            i_fv += (prev + fv) * (0.5 * (s.t - prev_t));
        }
        prev_fv = Some((s.t, fv));
        if k % 100 == 0 {
            let beta = acc.emit_pair(s.t).unwrap().beta.vector();
            for i in 0..3 {
                assert_eq!(
                    beta[i].to_bits(),
                    i_fv[i].to_bits(),
                    "beta component {i} differs from the lever-free formula at t = {}",
                    s.t
                );
            }
            checked += 1;
        }
    }
    assert!(checked > 25);
    println!("ACCEPTANCE 2 (zero-lever reduction): PASS ({checked} epochs bit-identical)");
}

#[test]
fn acceptance_3_monte_carlo_lever_peaks_removed() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.run_count, 100);
    let out = run_monte_carlo(&cfg, 1).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let peak_eq9 = out.compensated.peak_abs_yaw_deg();
    let peak_none = out.uncompensated.peak_abs_yaw_deg();
    assert!(
        peak_eq9 < 0.5 * peak_none,
        "compensated peak mean yaw {peak_eq9:.4} deg is not below half the \
         uncompensated peak {peak_none:.4} deg"
    );

    let final_eq9 = out.compensated.final_abs_deg();
    let final_base = out.zero_lever.final_abs_deg();
    for (i, name) in ["pitch", "roll", "yaw"].iter().enumerate() {
        assert!(
            final_eq9[i] <= 2.0 * final_base[i],
            "final mean {name} error {:.5} deg exceeds twice the zero-lever \
             baseline {:.5} deg",
            final_eq9[i],
            final_base[i]
        );
    }
    assert!(elapsed < 300.0, "Monte Carlo took {elapsed:.0} s (>= 5 min)");
    println!(
        "ACCEPTANCE 3 (Monte Carlo lever peaks removed): PASS \
         (peak yaw {peak_eq9:.4} vs {peak_none:.4} deg, final p/r/y \
         {:.4}/{:.4}/{:.4} vs baseline {:.4}/{:.4}/{:.4} deg, {elapsed:.1} s)",
        final_eq9[0], final_eq9[1], final_eq9[2], final_base[0], final_base[1], final_base[2]
    );
}

#[test]
fn acceptance_4_approximation_validity() {
    let mut cfg = ExperimentConfig::default();
    cfg.horizon = 1010.0;
    let report = report_remarks(&cfg).unwrap();
    let mut max_ratio = 0.0f64;
    for (t, ratio) in report.epochs.iter().zip(&report.approx_ratio) {
        if *t <= 1000.0 {
            assert!(
                *ratio < 0.1,
                "approximation ratio {ratio} at t = {t} s is not below 0.1"
            );
            max_ratio = max_ratio.max(*ratio);
        }
    }
    let i600 = report
        .epochs
        .iter()
        .position(|t| (*t - 600.0).abs() < 1e-9)
        .expect("600 s epoch present");
    let gap = report.beta_rel_gap[i600];
    assert!(
        gap < 1e-2,
        "relative exact-vs-approximate beta gap {gap} at 600 s is not below 1e-2"
    );
    println!(
        "ACCEPTANCE 4 (approximation validity): PASS \
         (max ratio {max_ratio:.3e} through 1000 s, relative beta gap {gap:.3e} at 600 s)"
    );
}

#[test]
fn acceptance_5_lever_term_stays_bounded() {
    let cfg = ExperimentConfig::default();
    let onset_settled = cfg.onset + cfg.ramp_time + 1.0;
    let mut cfg = cfg;
    cfg.horizon = 120.0;
    let report = report_remarks(&cfg).unwrap();

    let at = |t: f64| -> usize {
        report
            .epochs
            .iter()
            .position(|e| (*e - t).abs() < 1e-9)
            .unwrap_or_else(|| panic!("epoch {t} missing"))
    };
    let force60 = report.force_integral[at(60.0)];
    let lever60 = report.lever_coeff[at(60.0)];
    let factor = force60 / lever60;
    assert!(
        factor >= 10.0,
        "force integral {force60:.1} is only {factor:.1}x the lever coefficient {lever60:.3}"
    );

    let mut prev: Option<f64> = None;
    let mut checked = 0usize;
    for i in 0..report.epochs.len() {
        let t = report.epochs[i];
        if t < onset_settled {
            continue;
        }
        if report.force_integral[i] <= 0.0 {
            continue;
        }
        let ratio = report.lever_coeff[i] / report.force_integral[i];
        if let Some(p) = prev {
            assert!(
                ratio <= p * (1.0 + 1e-9),
                "lever/force ratio increased at t = {t} s: {p:.3e} -> {ratio:.3e}"
            );
            checked += 1;
        }
        prev = Some(ratio);
    }
    assert!(checked > 100);
    // the force integral itself keeps growing once the maneuver is underway
    for i in 1..report.epochs.len() {
        if report.epochs[i] > 3.0 {
            assert!(
                report.force_integral[i] > report.force_integral[i - 1],
                "force integral not increasing at t = {} s",
                report.epochs[i]
            );
        }
    }
    println!(
        "ACCEPTANCE 5 (lever term bounded vs growing force integral): PASS \
         (factor {factor:.0}x at 60 s, ratio nonincreasing over {checked} epochs)"
    );
}

#[test]
fn acceptance_6_solver_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_5506);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let c_true = loop {
            let w: f64 = rng.gen_range(-1.0..1.0);
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            let z: f64 = rng.gen_range(-1.0..1.0);
            let n2 = w * w + x * x + y * y + z * z;
            if n2 > 1e-3 && n2 < 1.0 {
                break UnitQuaternion::new_normalized(w, x, y, z, Frame::Body0, Frame::Nav0)
                    .to_dcm();
            }
        };
        let pairs: Vec<ObservationPair> = loop {
            let cand: Vec<ObservationPair> = (0..4)
                .map(|k| {
                    let beta = FrameVector::new(
                        Frame::Body0,
                        rng.gen_range(-20.0..20.0),
                        rng.gen_range(-20.0..20.0),
                        rng.gen_range(-20.0..20.0),
                    );
                    ObservationPair {
                        t: k as f64,
                        alpha: c_true.apply(&beta),
                        beta,
                        weight: 1.0,
                    }
                })
                .collect();
            if solve_attitude(&cand).is_ok() {
                break cand;
            }
        };
        let sol = solve_attitude(&pairs).unwrap();
        let err = attitude_error_angles(
            &sol.c_b_n0.retagged(Frame::Body, Frame::Nav),
            &c_true.retagged(Frame::Body, Frame::Nav),
        )
        .max_abs();
        assert!(err < 1e-9, "trial {trial}: solver error {err} rad");
        worst = worst.max(err);
    }
    // degenerate single-pair input must raise the unobservability error
    let beta = FrameVector::new(Frame::Body0, 1.0, 2.0, 3.0);
    let single = [ObservationPair {
        t: 0.0,
        alpha: beta.retagged(Frame::Nav0),
        beta,
        weight: 1.0,
    }];
    assert!(matches!(
        solve_attitude(&single),
        Err(AlignmentError::DegenerateGeometry { .. })
    ));
    println!(
        "ACCEPTANCE 6 (solver exactness): PASS \
         (1000 trials, worst error {worst:.3e} rad; single pair rejected)"
    );
}

#[test]
fn acceptance_7_strapdown_oracle_equivalence() {
    // piecewise-constant random rates, 100 s: coarse dt = 0.01 s against the
    // dt = 1e-4 s fine-step oracle
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_5507);
    let coarse_dt = 0.01;
    let fine_dt = 1e-4;
    let mut coarse = AttitudeChainState::new(0.0);
    let mut fine = AttitudeChainState::new(0.0);
    for _ in 0..(100.0 / coarse_dt) as usize {
        let w = FrameVector::new(
            Frame::Body,
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-0.4..0.4),
        );
        coarse = propagate_body_chain(&coarse, &[(coarse_dt, w * coarse_dt)]).unwrap();
        let n_sub = (coarse_dt / fine_dt).round() as usize;
        let subincs: Vec<(f64, FrameVector)> =
            (0..n_sub).map(|_| (fine_dt, w * fine_dt)).collect();
        fine = propagate_body_chain(&fine, &subincs).unwrap();
    }
    let err = attitude_error_angles(
        &coarse.c_bt_b0().retagged(Frame::Body, Frame::Nav),
        &fine.c_bt_b0().retagged(Frame::Body, Frame::Nav),
    )
    .max_abs();
    assert!(err < 1e-6, "coarse-vs-fine mismatch {err} rad");

    // orthonormality after 1e5 random quaternion update steps
    let mut chain = AttitudeChainState::new(0.0);
    for _ in 0..100_000 {
        let dtheta = FrameVector::new(
            Frame::Body,
            rng.gen_range(-4e-3..4e-3),
            rng.gen_range(-4e-3..4e-3),
            rng.gen_range(-4e-3..4e-3),
        );
        chain = propagate_body_chain(&chain, &[(1e-3, dtheta)]).unwrap();
    }
    let defect = chain.c_bt_b0().orthonormality_defect();
    assert!(defect < 1e-9, "orthonormality defect {defect} after 1e5 steps");
    println!(
        "ACCEPTANCE 7 (strapdown oracle equivalence): PASS \
         (fine-step mismatch {err:.3e} rad, defect {defect:.3e} after 1e5 steps)"
    );
}

#[test]
fn acceptance_8_deterministic_outputs() {
    let bin = env!("CARGO_BIN_EXE_inflight-align");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, "run_count = 20\nhorizon = 30.0\n").unwrap();

    let invoke = |out: &str, threads: u32| {
        let status = std::process::Command::new(bin)
            .args([
                "montecarlo",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
                "--threads",
                &threads.to_string(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    invoke("a", 1);
    invoke("b", 1);
    invoke("c", 8);

    for name in ["errors_eq9.csv", "errors_none.csv", "errors_zero_lever.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        let c = std::fs::read(dir.path().join("c").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs across repeated invocations");
        assert_eq!(a, c, "{name} differs between --threads 1 and --threads 8");
    }
    println!(
        "ACCEPTANCE 8 (deterministic outputs): PASS \
         (byte-identical CSVs across invocations and thread counts)"
    );
}
