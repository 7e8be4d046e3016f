//! Strapdown attitude-chain integrators.
//!
//! Two chains are propagated side by side: the gyro-driven body chain
//! `C_b(t)^b(0)` (rate `w_ib^b`) and the GNSS-driven navigation chain
//! `C_n(t)^n(0)` (rate `w_in^n`). Both start at identity and unwind the
//! motion of their frame relative to its inertially frozen copy at t = 0, so
//! the constant initial attitude can be factored out between them.
//!
//! Quaternions are integrated with per-step renormalization; rotation
//! increments are right-multiplied (`q <- q * q(dtheta)`). Callers supply
//! trapezoidal-average rates (or integrated angular increments) per step for
//! second-order accuracy.

use crate::attitude::{
    quat_multiply, Frame, FrameVector, RotationMatrix, UnitQuaternion,
};
use crate::earth::{earth_rate_n, transport_rate, EarthError, GeodeticPosition};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StrapdownError {
    #[error("non-positive step dt = {0} s")]
    NonPositiveDt(f64),
    #[error("rotation increment magnitude {0} rad reaches the principal range limit")]
    ExcessiveRotation(f64),
    #[error("interpolation time {t} s outside GNSS span [{start}, {end}] s")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("GNSS stream needs at least one sample")]
    EmptyStream,
    #[error(transparent)]
    Earth(#[from] EarthError),
}

/// One IMU record: angular rate and specific force, body frame, at time `t`.
#[derive(Clone, Copy, Debug)]
pub struct ImuSample {
    pub t: f64,
    pub omega_ib_b: FrameVector,
    pub f_b: FrameVector,
}

/// One GNSS record: antenna geodetic position and NED velocity at time `t`.
#[derive(Clone, Copy, Debug)]
pub struct GnssSample {
    pub t: f64,
    pub p_gps: GeodeticPosition,
    pub v_gps_n: FrameVector,
}

/// The two attitude chains plus the latched initial gyro sample.
#[derive(Clone, Copy, Debug)]
pub struct AttitudeChainState {
    t: f64,
    q_b: UnitQuaternion,
    q_n: UnitQuaternion,
    omega_ib_b_0: Option<FrameVector>,
}

impl AttitudeChainState {
    pub fn new(t0: f64) -> Self {
        Self {
            t: t0,
            q_b: UnitQuaternion::identity(Frame::Body, Frame::Body0),
            q_n: UnitQuaternion::identity(Frame::Nav, Frame::Nav0),
            omega_ib_b_0: None,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Body chain `C_b(t)^b(0)`.
    pub fn c_bt_b0(&self) -> RotationMatrix {
        self.q_b.to_dcm()
    }

    /// Navigation chain `C_n(t)^n(0)`.
    pub fn c_nt_n0(&self) -> RotationMatrix {
        self.q_n.to_dcm()
    }

    /// First gyro sample, immutable once latched.
    pub fn omega_ib_b_0(&self) -> Option<FrameVector> {
        self.omega_ib_b_0
    }

    pub fn latch_initial_gyro(&mut self, omega_ib_b: FrameVector) {
        debug_assert!(
            self.omega_ib_b_0.is_none(),
            "initial gyro sample already latched"
        );
        if self.omega_ib_b_0.is_none() {
            self.omega_ib_b_0 = Some(omega_ib_b);
        }
    }

    /// Combined per-sample advance: right-multiply the body chain by the
    /// angular increment `dtheta_b` and the navigation chain by
    /// `omega_in_n * dt`, moving time forward once.
    pub fn step(
        &self,
        dt: f64,
        dtheta_b: &FrameVector,
        omega_in_n: &FrameVector,
    ) -> Result<Self, StrapdownError> {
        if dt <= 0.0 {
            return Err(StrapdownError::NonPositiveDt(dt));
        }
        let angle_b = dtheta_b.norm();
        if angle_b >= std::f64::consts::PI {
            return Err(StrapdownError::ExcessiveRotation(angle_b));
        }
        let dtheta_n = *omega_in_n * dt;
        let angle_n = dtheta_n.norm();
        if angle_n >= std::f64::consts::PI {
            return Err(StrapdownError::ExcessiveRotation(angle_n));
        }
        let mut out = *self;
        out.q_b = quat_multiply(&self.q_b, &UnitQuaternion::from_rotvec(dtheta_b));
        out.q_n = quat_multiply(&self.q_n, &UnitQuaternion::from_rotvec(&dtheta_n));
        out.t = self.t + dt;
        Ok(out)
    }
}

/// Trapezoidal angular increment over one sample interval from the rate
/// samples at its endpoints.
pub fn rotation_increment(omega_prev: &FrameVector, omega_curr: &FrameVector, dt: f64) -> FrameVector {
    (*omega_prev + *omega_curr) * (0.5 * dt)
}

/// Two-sample coning correction using the previous interval's increment:
/// `dtheta + (1/12) dtheta_prev x dtheta`.
pub fn coning_correction(prev_increment: &FrameVector, increment: &FrameVector) -> FrameVector {
    *increment + prev_increment.cross(increment) * (1.0 / 12.0)
}

/// Advance the body chain by a contiguous sequence of `(dt, dtheta)` angular
/// increments (`dtheta = integral of w_ib^b` over each interval).
pub fn propagate_body_chain(
    state: &AttitudeChainState,
    increments: &[(f64, FrameVector)],
) -> Result<AttitudeChainState, StrapdownError> {
    let mut out = *state;
    for (dt, dtheta) in increments {
        if *dt <= 0.0 {
            return Err(StrapdownError::NonPositiveDt(*dt));
        }
        let angle = dtheta.norm();
        if angle >= std::f64::consts::PI {
            return Err(StrapdownError::ExcessiveRotation(angle));
        }
        out.q_b = quat_multiply(&out.q_b, &UnitQuaternion::from_rotvec(dtheta));
        out.t += dt;
    }
    Ok(out)
}

/// Advance the navigation chain one step with the rotation vector
/// `omega_in_n * dt`. Supply a midpoint or trapezoidal-average rate over the
/// step for O(dt^2) accuracy.
pub fn propagate_nav_chain(
    state: &AttitudeChainState,
    omega_in_n: &FrameVector,
    dt: f64,
) -> Result<AttitudeChainState, StrapdownError> {
    if dt <= 0.0 {
        return Err(StrapdownError::NonPositiveDt(dt));
    }
    debug_assert_eq!(omega_in_n.frame(), Frame::Nav);
    let dtheta = *omega_in_n * dt;
    let angle = dtheta.norm();
    if angle >= std::f64::consts::PI {
        return Err(StrapdownError::ExcessiveRotation(angle));
    }
    let mut out = *state;
    out.q_n = quat_multiply(&out.q_n, &UnitQuaternion::from_rotvec(&dtheta));
    out.t = state.t + dt;
    Ok(out)
}

/// Angular rates between every frame pair the mechanization touches,
/// resolved from an attitude (truth in simulation, estimated at runtime).
#[derive(Clone, Copy, Debug)]
pub struct DerivedRates {
    pub omega_in_n: FrameVector,
    pub omega_ie_n: FrameVector,
    pub omega_en_n: FrameVector,
    pub omega_eb_b: FrameVector,
    pub omega_nb_b: FrameVector,
    pub omega_ie_b: FrameVector,
}

/// Resolve earth/transport/body rates at one epoch:
/// `w_ie^b = C_n^b w_ie^n`, `w_eb^b = w_ib^b - w_ie^b`,
/// `w_nb^b = w_ib^b - C_n^b w_in^n`.
pub fn derive_rates(
    c_b_n: &RotationMatrix,
    omega_ib_b: &FrameVector,
    pos: &GeodeticPosition,
    v_n: &FrameVector,
) -> Result<DerivedRates, StrapdownError> {
    debug_assert_eq!(c_b_n.from_frame(), Frame::Body);
    debug_assert_eq!(c_b_n.to_frame(), Frame::Nav);
    let omega_ie_n = earth_rate_n(pos.latitude());
    let omega_en_n = transport_rate(v_n, pos)?;
    let omega_in_n = omega_ie_n + omega_en_n;
    let c_n_b = c_b_n.transpose();
    let omega_ie_b = c_n_b.apply(&omega_ie_n);
    let omega_in_b = c_n_b.apply(&omega_in_n);
    Ok(DerivedRates {
        omega_in_n,
        omega_ie_n,
        omega_en_n,
        omega_eb_b: *omega_ib_b - omega_ie_b,
        omega_nb_b: *omega_ib_b - omega_in_b,
        omega_ie_b,
    })
}

/// Linear interpolation of a GNSS stream onto arbitrary epochs (e.g. the IMU
/// grid). Exact at the sample nodes; longitude interpolates along the
/// shortest arc.
pub struct GnssInterpolator<'a> {
    samples: &'a [GnssSample],
}

impl<'a> GnssInterpolator<'a> {
    pub fn new(samples: &'a [GnssSample]) -> Result<Self, StrapdownError> {
        if samples.is_empty() {
            return Err(StrapdownError::EmptyStream);
        }
        debug_assert!(
            samples.windows(2).all(|w| w[1].t > w[0].t),
            "GNSS timestamps must be strictly increasing"
        );
        Ok(Self { samples })
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn sample_at(&self, t: f64) -> Result<(GeodeticPosition, FrameVector), StrapdownError> {
        const EPS: f64 = 1e-9;
        let (start, end) = (self.start(), self.end());
        if t < start - EPS || t > end + EPS {
            return Err(StrapdownError::OutOfSpan { t, start, end });
        }
        // bracketing index: largest i with samples[i].t <= t
        let i = match self
            .samples
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok((self.samples[i].p_gps, self.samples[i].v_gps_n)),
            Err(0) => 0,
            Err(i) => i - 1,
        };
        if i + 1 >= self.samples.len() {
            let s = &self.samples[i];
            return Ok((s.p_gps, s.v_gps_n));
        }
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        let dlon = shortest_angle_delta(a.p_gps.longitude(), b.p_gps.longitude());
        let pos = GeodeticPosition::new(
            a.p_gps.latitude() + u * (b.p_gps.latitude() - a.p_gps.latitude()),
            a.p_gps.longitude() + u * dlon,
            a.p_gps.height() + u * (b.p_gps.height() - a.p_gps.height()),
        )?;
        let v = FrameVector::from_vector(
            Frame::Nav,
            a.v_gps_n.vector() + (b.v_gps_n.vector() - a.v_gps_n.vector()) * u,
        );
        Ok((pos, v))
    }
}

fn shortest_angle_delta(from: f64, to: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = (to - from) % two_pi;
    if d > std::f64::consts::PI {
        d -= two_pi;
    } else if d < -std::f64::consts::PI {
        d += two_pi;
    }
    d
}
