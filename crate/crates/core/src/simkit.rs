//! Simulation kit: analytic truth trajectories, inverse-strapdown IMU
//! synthesis, lever-arm-correct GNSS synthesis, and sensor error models.
//!
//! Attitude, velocity and acceleration of the truth profiles are closed-form,
//! so the algorithms under test never fight propagated-truth error. Geodetic
//! position has no closed form on the ellipsoid; it is quadrature of the
//! closed-form velocity (RK4 with exact substep velocities, error far below
//! every test tolerance).
//!
//! Everything stochastic is keyed by `(seed, channel)` through a splitmix
//! chain, so streams are reproducible bit-for-bit and independent of
//! evaluation order.

use crate::alignment::{lever_arm_velocity, LeverArm};
use crate::attitude::{dcm_from_euler, Frame, FrameVector, RotationMatrix};
use crate::earth::{
    curvature_radii, position_matrix_rc, EarthError, EarthKinematics, GeodeticPosition,
};
use crate::strapdown::{derive_rates, GnssSample, ImuSample, StrapdownError};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Bank-angle modeling constant for coordinated turns [m/s^2].
const BANK_GRAVITY: f64 = 9.80665;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid trajectory profile: {0}")]
    InvalidProfile(String),
    #[error("generation step {0} s outside [1e-3, 0.1] s")]
    InvalidDt(f64),
    #[error("gnss interval {gnss_dt} s is not a multiple of the truth step {dt} s")]
    IncompatibleRates { gnss_dt: f64, dt: f64 },
    #[error("sensor error model: {0}")]
    InvalidErrorModel(String),
    #[error("truth stream needs at least two samples")]
    StreamTooShort,
    #[error(transparent)]
    Earth(#[from] EarthError),
    #[error(transparent)]
    Strapdown(#[from] StrapdownError),
}

/// One sample of the kinematic ground truth.
#[derive(Clone, Copy, Debug)]
pub struct TruthState {
    pub t: f64,
    pub pos: GeodeticPosition,
    pub v_n: FrameVector,
    /// Componentwise time derivative of `v_n`.
    pub a_n: FrameVector,
    pub c_b_n: RotationMatrix,
    pub omega_nb_b: FrameVector,
}

/// Maneuver family of a truth profile.
#[derive(Clone, Copy, Debug)]
pub enum ProfileKind {
    /// Level flight, constant heading, constant along-track acceleration.
    StraightAccelerate { accel: f64 },
    /// Level flight, heading-rate weave `rate * sin^3(2 pi (t - onset) / T)`
    /// (the cubed envelope keeps the bank rate continuous at the start).
    STurnWeave { period: f64 },
    /// Constant-rate coordinated turn with a constant climb rate; the turn
    /// rate ramps in over `ramp_time` with a C2 (quintic) smoothstep.
    ClimbingTurn { climb_rate: f64 },
}

/// Parametric analytic trajectory.
///
/// Turning profiles hold a quiet straight leg for the first `onset` seconds
/// so start-epoch latches see constant rates.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryProfile {
    pub kind: ProfileKind,
    /// Total speed [m/s].
    pub speed: f64,
    /// Peak (weave) or steady (turn) heading rate [rad/s].
    pub turn_rate: f64,
    pub duration: f64,
    pub init_pos: GeodeticPosition,
    pub init_heading: f64,
    /// Maneuver start delay [s] (ignored by the straight profile).
    pub onset: f64,
    /// Turn-rate ramp-in interval [s] (climbing turn).
    pub ramp_time: f64,
}

impl TrajectoryProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidProfile(msg));
        if !(0.0..400.0).contains(&self.speed) {
            return fail(format!("speed {} m/s outside [0, 400)", self.speed));
        }
        if self.turn_rate.abs() >= 0.5 {
            return fail(format!("turn rate {} rad/s outside (-0.5, 0.5)", self.turn_rate));
        }
        if self.duration <= 0.0 || !self.duration.is_finite() {
            return fail(format!("duration {} s must be positive", self.duration));
        }
        if self.ramp_time < 0.0 {
            return fail(format!("ramp time {} s must be non-negative", self.ramp_time));
        }
        if self.onset < 0.0 {
            return fail(format!("onset {} s must be non-negative", self.onset));
        }
        match self.kind {
            ProfileKind::StraightAccelerate { accel } => {
                if (self.speed + accel * self.duration).abs() >= 400.0 || accel.abs() > 50.0 {
                    return fail(format!("acceleration {accel} m/s^2 drives speed out of bounds"));
                }
            }
            ProfileKind::STurnWeave { period } => {
                if period <= 0.0 {
                    return fail(format!("weave period {period} s must be positive"));
                }
            }
            ProfileKind::ClimbingTurn { climb_rate } => {
                if climb_rate.abs() >= self.speed && self.speed > 0.0 {
                    return fail(format!(
                        "climb rate {climb_rate} m/s must be below the speed {} m/s",
                        self.speed
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form Euler angles, rates and velocity at one instant.
struct KinematicSample {
    psi: f64,
    psi_dot: f64,
    theta: f64,
    phi: f64,
    phi_dot: f64,
    vh: f64,
    vh_dot: f64,
    vd: f64,
}

/// Quintic smoothstep (value, slope): C2 at both ends, so rates built from
/// it keep continuous derivatives through the ramp.
fn smoothstep(t: f64, tau: f64) -> (f64, f64) {
    if tau <= 0.0 || t >= tau {
        return (if t >= 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let x = (t / tau).max(0.0);
    let r = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let dr = 30.0 * x * x * (1.0 - x) * (1.0 - x) / tau;
    (r, dr)
}

/// Integral of the quintic smoothstep from 0 to t.
fn smoothstep_integral(t: f64, tau: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if tau <= 0.0 {
        return t;
    }
    if t >= tau {
        return tau / 2.0 + (t - tau);
    }
    let x = t / tau;
    let x4 = x * x * x * x;
    tau * x4 * (2.5 - 3.0 * x + x * x)
}

fn kinematics_at(profile: &TrajectoryProfile, t: f64) -> KinematicSample {
    match profile.kind {
        ProfileKind::StraightAccelerate { accel } => KinematicSample {
            psi: profile.init_heading,
            psi_dot: 0.0,
            theta: 0.0,
            phi: 0.0,
            phi_dot: 0.0,
            vh: profile.speed + accel * t,
            vh_dot: accel,
            vd: 0.0,
        },
        ProfileKind::STurnWeave { period } => {
            let w = 2.0 * std::f64::consts::PI / period;
            let te = t - profile.onset;
            let (psi_dot, psi_ddot, turned) = if te <= 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                let (s, c) = (w * te).sin_cos();
                (
                    profile.turn_rate * s * s * s,
                    3.0 * profile.turn_rate * w * s * s * c,
                    // integral of sin^3: (2/3 - cos + cos^3/3) / w
                    profile.turn_rate * (2.0 / 3.0 - c + c * c * c / 3.0) / w,
                )
            };
            let psi = profile.init_heading + turned;
            let (phi, phi_dot) = bank_angle(profile.speed, psi_dot, psi_ddot);
            KinematicSample {
                psi,
                psi_dot,
                theta: 0.0,
                phi,
                phi_dot,
                vh: profile.speed,
                vh_dot: 0.0,
                vd: 0.0,
            }
        }
        ProfileKind::ClimbingTurn { climb_rate } => {
            let vh = (profile.speed * profile.speed - climb_rate * climb_rate)
                .max(0.0)
                .sqrt();
            let te = t - profile.onset;
            let (r, r_dot) = if te < 0.0 {
                (0.0, 0.0)
            } else {
                smoothstep(te, profile.ramp_time)
            };
            let psi_dot = profile.turn_rate * r;
            let psi_ddot = profile.turn_rate * r_dot;
            let psi = profile.init_heading
                + profile.turn_rate * smoothstep_integral(te, profile.ramp_time);
            let (phi, phi_dot) = bank_angle(vh, psi_dot, psi_ddot);
            KinematicSample {
                psi,
                psi_dot,
                theta: climb_rate.atan2(vh),
                phi,
                phi_dot,
                vh,
                vh_dot: 0.0,
                vd: -climb_rate,
            }
        }
    }
}

/// Coordinated-turn bank angle and its rate: `phi = atan(vh psi_dot / g)`.
fn bank_angle(vh: f64, psi_dot: f64, psi_ddot: f64) -> (f64, f64) {
    let u = vh * psi_dot / BANK_GRAVITY;
    let u_dot = vh * psi_ddot / BANK_GRAVITY;
    (u.atan(), u_dot / (1.0 + u * u))
}

fn velocity_at(profile: &TrajectoryProfile, t: f64) -> Vector3<f64> {
    let k = kinematics_at(profile, t);
    Vector3::new(k.vh * k.psi.cos(), k.vh * k.psi.sin(), k.vd)
}

fn truth_at(profile: &TrajectoryProfile, t: f64, pos: GeodeticPosition) -> TruthState {
    let k = kinematics_at(profile, t);
    let (sp, cp) = k.psi.sin_cos();
    let v_n = FrameVector::new(Frame::Nav, k.vh * cp, k.vh * sp, k.vd);
    let a_n = FrameVector::new(
        Frame::Nav,
        k.vh_dot * cp - k.vh * k.psi_dot * sp,
        k.vh_dot * sp + k.vh * k.psi_dot * cp,
        0.0,
    );
    let c_b_n = dcm_from_euler(k.psi, k.theta, k.phi, Frame::Body, Frame::Nav);
    // Euler-rate resolution of the body rate relative to the local-level
    // frame (theta_dot = 0 for every profile family here)
    let omega_nb_b = FrameVector::new(
        Frame::Body,
        k.phi_dot - k.psi_dot * k.theta.sin(),
        k.psi_dot * k.theta.cos() * k.phi.sin(),
        k.psi_dot * k.theta.cos() * k.phi.cos(),
    );
    TruthState {
        t,
        pos,
        v_n,
        a_n,
        c_b_n,
        omega_nb_b,
    }
}

/// Geodetic position rates for the RK4 quadrature.
fn position_rates(pos: &[f64; 3], v: &Vector3<f64>) -> [f64; 3] {
    let (r_n, r_e) = curvature_radii(pos[0]);
    [
        v.x / (r_n + pos[2]),
        v.y / ((r_e + pos[2]) * pos[0].cos()),
        -v.z,
    ]
}

/// Generate a kinematically consistent truth stream at step `dt`.
pub fn gen_trajectory(profile: &TrajectoryProfile, dt: f64) -> Result<Vec<TruthState>, SimError> {
    profile.validate()?;
    if !(1e-3..=0.1).contains(&dt) {
        return Err(SimError::InvalidDt(dt));
    }
    let n = (profile.duration / dt).round() as usize;
    let mut states = Vec::with_capacity(n + 1);
    let mut y = [
        profile.init_pos.latitude(),
        profile.init_pos.longitude(),
        profile.init_pos.height(),
    ];
    for k in 0..=n {
        let t = k as f64 * dt;
        let pos = GeodeticPosition::new(y[0], y[1], y[2])?;
        states.push(truth_at(profile, t, pos));
        if k < n {
            // RK4 on the geodetic rates with exact substep velocities
            let f = |yy: &[f64; 3], tt: f64| position_rates(yy, &velocity_at(profile, tt));
            let k1 = f(&y, t);
            let y2 = [
                y[0] + 0.5 * dt * k1[0],
                y[1] + 0.5 * dt * k1[1],
                y[2] + 0.5 * dt * k1[2],
            ];
            let k2 = f(&y2, t + 0.5 * dt);
            let y3 = [
                y[0] + 0.5 * dt * k2[0],
                y[1] + 0.5 * dt * k2[1],
                y[2] + 0.5 * dt * k2[2],
            ];
            let k3 = f(&y3, t + 0.5 * dt);
            let y4 = [y[0] + dt * k3[0], y[1] + dt * k3[1], y[2] + dt * k3[2]];
            let k4 = f(&y4, t + dt);
            for i in 0..3 {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    Ok(states)
}

/// Error-free inverse strapdown at one truth sample:
/// `f^b = C_n^b (a^n + (2 w_ie^n + w_en^n) x v^n - g^n)`,
/// `w_ib^b = w_nb^b + C_n^b (w_ie^n + w_en^n)`.
fn ideal_imu_at(s: &TruthState) -> Result<ImuSample, SimError> {
    let earth = EarthKinematics::at(&s.pos, &s.v_n)?;
    let c_n_b = s.c_b_n.transpose();
    let coriolis = (earth.omega_ie_n * 2.0 + earth.omega_en_n).cross(&s.v_n);
    let f_n = s.a_n + coriolis - earth.gravity_n;
    Ok(ImuSample {
        t: s.t,
        omega_ib_b: s.omega_nb_b + c_n_b.apply(&earth.omega_in_n()),
        f_b: c_n_b.apply(&f_n),
    })
}

/// Perfect (error-free) IMU stream; forward strapdown reproduces the truth.
pub fn synthesize_imu(truth: &[TruthState]) -> Result<Vec<ImuSample>, SimError> {
    truth.iter().map(ideal_imu_at).collect()
}

/// Sensor error grades: constant biases plus discretized white noise for the
/// IMU, additive white noise for GNSS. All sigmas are one-sided (>= 0);
/// identical seeds give bit-identical streams.
#[derive(Clone, Copy, Debug)]
pub struct SensorErrorModel {
    /// Constant gyro bias [rad/s], body axes.
    pub gyro_bias: FrameVector,
    /// Gyro angle random walk [rad/sqrt(s)]; per-sample rate noise is
    /// `arw / sqrt(dt)`.
    pub gyro_arw: f64,
    /// Constant accelerometer bias [m/s^2], body axes.
    pub accel_bias: FrameVector,
    /// Accelerometer velocity random walk [m/s^1.5]; per-sample specific
    /// force noise is `vrw / sqrt(dt)`.
    pub accel_vrw: f64,
    /// GNSS velocity noise, 1-sigma per NED axis [m/s].
    pub gnss_vel_noise: f64,
    /// GNSS position noise, 1-sigma per NED axis [m].
    pub gnss_pos_noise: f64,
    pub seed: u64,
}

impl SensorErrorModel {
    pub fn zero(seed: u64) -> Self {
        Self {
            gyro_bias: FrameVector::zero(Frame::Body),
            gyro_arw: 0.0,
            accel_bias: FrameVector::zero(Frame::Body),
            accel_vrw: 0.0,
            gnss_vel_noise: 0.0,
            gnss_pos_noise: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, s) in [
            ("gyro_arw", self.gyro_arw),
            ("accel_vrw", self.accel_vrw),
            ("gnss_vel_noise", self.gnss_vel_noise),
            ("gnss_pos_noise", self.gnss_pos_noise),
        ] {
            if s < 0.0 || !s.is_finite() {
                return Err(SimError::InvalidErrorModel(format!(
                    "{name} must be finite and >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    fn imu_is_exact(&self) -> bool {
        self.gyro_bias.norm() == 0.0
            && self.accel_bias.norm() == 0.0
            && self.gyro_arw == 0.0
            && self.accel_vrw == 0.0
    }
}

// channel salts for the per-purpose generators
const CH_GYRO: u64 = 0x6779_726f;
const CH_ACCEL: u64 = 0x6163_6365;
const CH_GNSS_VEL: u64 = 0x6776_656c;
const CH_GNSS_POS: u64 = 0x6770_6f73;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derivation (splitmix chain). Used for per-channel and
/// per-run generator seeds so parallel evaluation order cannot matter.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

fn channel_rng(seed: u64, channel: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, channel))
}

struct NoiseChannel {
    rng: ChaCha8Rng,
    dist: Option<Normal<f64>>,
}

impl NoiseChannel {
    fn new(seed: u64, channel: u64, sigma: f64) -> Self {
        Self {
            rng: channel_rng(seed, channel),
            dist: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma")),
        }
    }

    fn draw3(&mut self) -> Vector3<f64> {
        match self.dist {
            None => Vector3::zeros(),
            Some(d) => Vector3::new(
                d.sample(&mut self.rng),
                d.sample(&mut self.rng),
                d.sample(&mut self.rng),
            ),
        }
    }
}

/// GNSS stream per the antenna offset model
/// `p_gps = p + R_c C_b^n l^b`, `v_gps^n = v^n + C_b^n (w_eb^b x l^b)`,
/// decimated to `gnss_dt` with additive white noise.
pub fn synthesize_gnss(
    truth: &[TruthState],
    lever: &LeverArm,
    err: &SensorErrorModel,
    gnss_dt: f64,
) -> Result<Vec<GnssSample>, SimError> {
    err.validate()?;
    if truth.len() < 2 {
        return Err(SimError::StreamTooShort);
    }
    let dt = truth[1].t - truth[0].t;
    let stride = (gnss_dt / dt).round() as usize;
    if stride == 0 || (stride as f64 * dt - gnss_dt).abs() > 1e-9 {
        return Err(SimError::IncompatibleRates { gnss_dt, dt });
    }
    let mut vel_noise = NoiseChannel::new(err.seed, CH_GNSS_VEL, err.gnss_vel_noise);
    let mut pos_noise = NoiseChannel::new(err.seed, CH_GNSS_POS, err.gnss_pos_noise);

    let mut out = Vec::with_capacity(truth.len() / stride + 1);
    for s in truth.iter().step_by(stride) {
        let imu = ideal_imu_at(s)?;
        let rates = derive_rates(&s.c_b_n, &imu.omega_ib_b, &s.pos, &s.v_n)?;
        let mut v_gps = lever_arm_velocity(&s.v_n, &s.c_b_n, &rates.omega_eb_b, lever);
        let rc = position_matrix_rc(&s.pos)?;
        let lever_n = s
            .c_b_n
            .apply(&FrameVector::from_vector(Frame::Body, lever.vector()));
        let d = rc * lever_n.vector();
        let mut p_gps = s.pos.offset(d.x, d.y, d.z)?;

        let nv = vel_noise.draw3();
        let np = pos_noise.draw3();
        if nv != Vector3::zeros() {
            v_gps = FrameVector::from_vector(Frame::Nav, v_gps.vector() + nv);
        }
        if np != Vector3::zeros() {
            let dn = rc * np;
            p_gps = p_gps.offset(dn.x, dn.y, dn.z)?;
        }
        out.push(GnssSample {
            t: s.t,
            p_gps,
            v_gps_n: v_gps,
        });
    }
    Ok(out)
}

/// Additive bias plus discretized white noise on an IMU stream; the all-zero
/// model returns the input unchanged.
pub fn apply_imu_errors(stream: &[ImuSample], err: &SensorErrorModel) -> Result<Vec<ImuSample>, SimError> {
    err.validate()?;
    if err.imu_is_exact() || stream.len() < 2 {
        return Ok(stream.to_vec());
    }
    let dt = stream[1].t - stream[0].t;
    let sqrt_dt = dt.sqrt();
    let mut gyro = NoiseChannel::new(err.seed, CH_GYRO, err.gyro_arw / sqrt_dt);
    let mut accel = NoiseChannel::new(err.seed, CH_ACCEL, err.accel_vrw / sqrt_dt);
    Ok(stream
        .iter()
        .map(|s| ImuSample {
            t: s.t,
            omega_ib_b: FrameVector::from_vector(
                Frame::Body,
                s.omega_ib_b.vector() + err.gyro_bias.vector() + gyro.draw3(),
            ),
            f_b: FrameVector::from_vector(
                Frame::Body,
                s.f_b.vector() + err.accel_bias.vector() + accel.draw3(),
            ),
        })
        .collect())
}
