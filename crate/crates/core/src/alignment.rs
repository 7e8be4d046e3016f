//! Velocity-integration alignment with GNSS-antenna lever-arm compensation.
//!
//! The accumulator turns raw IMU samples and (interpolated) GNSS fixes into
//! observation-vector pairs `(alpha(t), beta(t))` that satisfy
//! `alpha = C_b^n(0) * beta` for the constant initial attitude:
//!
//! ```text
//! alpha = C_n(t)^n(0) v_gps - v_gps(0) + int C_n(t)^n(0) (w_ie^n x v_gps) dt
//!         - int C_n(t)^n(0) g^n dt
//! beta  = int C_b(t)^b(0) f^b dt
//!         + (C_b(t)^b(0) [w_ib^b x] - [w_ib^b(0) x]) l^b
//! ```
//!
//! The `beta` lever term above neglects earth rate inside the gyro rates; the
//! exact form (available when simulation truth supplies earth-relative rates)
//! keeps the dropped pieces:
//!
//! ```text
//! beta  = int C_b(t)^b(0) f^b dt
//!         + (C_b(t)^b(0) [w_eb^b x] - [w_eb^b(0) x]
//!            + [w_ie^b(0) x] int C_b(t)^b(0) [w_eb^b x] dt) l^b
//! ```
//!
//! All four running integrals use trapezoidal quadrature on the IMU grid.
//! Accumulated pairs are solved for `C_b^n(0)` in weighted least squares via
//! the Davenport q-method (dominant eigenvector of the 4x4 K matrix).

use crate::attitude::{skew, Frame, FrameVector, Mat3, RotationMatrix, UnitQuaternion};
use crate::earth::{EarthError, EarthKinematics};
use crate::strapdown::{
    coning_correction, rotation_increment, AttitudeChainState, DerivedRates, ImuSample,
    StrapdownError,
};
use nalgebra::{Matrix4, Vector3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("lever arm norm {0} m exceeds the 100 m sanity bound")]
    LeverTooLong(f64),
    #[error("accumulator has not ingested any samples")]
    EmptyAccumulator,
    #[error("pair requested at t = {requested} s but accumulator is at t = {current} s")]
    EpochMismatch { requested: f64, current: f64 },
    #[error("non-monotonic sample time: {next} s after {prev} s")]
    NonMonotonicTime { prev: f64, next: f64 },
    #[error("data dropout: gap {gap} s exceeds twice the nominal interval {nominal} s")]
    DataDropout { gap: f64, nominal: f64 },
    #[error("operation needs truth-resolved earth-relative rates, none were supplied")]
    MissingTruthRates,
    #[error("earth-relative rate is zero; approximation ratio is undefined")]
    DegenerateRate,
    #[error("no usable observation pairs")]
    NoObservations,
    #[error("pair weights must be non-negative and not all zero")]
    InvalidWeights,
    #[error("degenerate pair geometry: rotation about axis [{0}, {1}, {2}] is unobservable", axis[0], axis[1], axis[2])]
    DegenerateGeometry { axis: [f64; 3] },
    #[error(transparent)]
    Strapdown(#[from] StrapdownError),
    #[error(transparent)]
    Earth(#[from] EarthError),
}

/// Known body-frame offset from the INS reference point to the GNSS antenna
/// phase center. Constant over the alignment interval.
#[derive(Clone, Copy, Debug)]
pub struct LeverArm {
    l_b: FrameVector,
}

impl LeverArm {
    pub fn new(l_b: FrameVector) -> Result<Self, AlignmentError> {
        debug_assert_eq!(l_b.frame(), Frame::Body);
        if l_b.norm() >= 100.0 {
            return Err(AlignmentError::LeverTooLong(l_b.norm()));
        }
        Ok(Self { l_b })
    }

    pub fn zero() -> Self {
        Self {
            l_b: FrameVector::zero(Frame::Body),
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.l_b.vector()
    }

    pub fn is_zero(&self) -> bool {
        self.l_b.vector() == Vector3::zeros()
    }
}

/// GNSS antenna velocity from INS velocity: `v_gps^n = v^n + C_b^n (w_eb^b x l^b)`.
pub fn lever_arm_velocity(
    v_n: &FrameVector,
    c_b_n: &RotationMatrix,
    omega_eb_b: &FrameVector,
    lever: &LeverArm,
) -> FrameVector {
    debug_assert_eq!(v_n.frame(), Frame::Nav);
    debug_assert_eq!(omega_eb_b.frame(), Frame::Body);
    let correction = skew(omega_eb_b) * lever.vector();
    *v_n + c_b_n.apply(&FrameVector::from_vector(Frame::Body, correction))
}

/// One accumulated observation pair: `alpha` in n(0), `beta` in b(0),
/// satisfying `alpha = C_b^n(0) beta` for perfect data.
#[derive(Clone, Copy, Debug)]
pub struct ObservationPair {
    pub t: f64,
    pub alpha: FrameVector,
    pub beta: FrameVector,
    pub weight: f64,
}

/// Pair weight schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairWeighting {
    /// All pairs weighted 1.
    Uniform,
    /// Weight proportional to time since the start epoch.
    TimeRamp,
}

/// Accumulator tuning knobs.
#[derive(Clone, Copy, Debug)]
pub struct AccumulatorOptions {
    /// Expected IMU sample interval [s]; gaps beyond twice this are dropouts.
    pub nominal_dt: f64,
    /// Window [s] over which the emitted `w_ib^b(0)` is the componentwise
    /// median of the incoming gyro samples (0 latches the first sample).
    pub settle_window: f64,
    /// Apply the two-sample coning correction to gyro increments.
    pub coning: bool,
    pub weighting: PairWeighting,
}

impl AccumulatorOptions {
    pub fn new(nominal_dt: f64) -> Self {
        Self {
            nominal_dt,
            settle_window: 0.1,
            coning: false,
            weighting: PairWeighting::Uniform,
        }
    }
}

#[derive(Clone, Copy)]
struct IntegrandCache {
    t: f64,
    omega_ib_b: FrameVector,
    omega_in_n: FrameVector,
    fv: Vector3<f64>,
    cor: Vector3<f64>,
    g: Vector3<f64>,
    lever_exact: Option<Mat3>,
}

/// Running state of one alignment: the two attitude chains, the four
/// trapezoidal integrals, and the latched start-epoch quantities.
pub struct AlignmentAccumulator {
    chain: AttitudeChainState,
    lever: LeverArm,
    opts: AccumulatorOptions,
    i_fv: Vector3<f64>,
    i_cor: Vector3<f64>,
    i_g: Vector3<f64>,
    i_lever_exact: Mat3,
    has_truth: bool,
    prev: Option<IntegrandCache>,
    prev_increment: Option<FrameVector>,
    start_t: f64,
    v_gps_n_0: Option<FrameVector>,
    omega0_emit: Option<FrameVector>,
    omega0_final: bool,
    settle_buf: Vec<FrameVector>,
    omega_eb_b_0: Option<FrameVector>,
    omega_ie_b0: Option<FrameVector>,
    last_omega_eb_b: Option<FrameVector>,
    last_v_gps: Option<FrameVector>,
}

impl AlignmentAccumulator {
    pub fn new(lever: LeverArm, opts: AccumulatorOptions) -> Self {
        Self {
            chain: AttitudeChainState::new(0.0),
            lever,
            opts,
            i_fv: Vector3::zeros(),
            i_cor: Vector3::zeros(),
            i_g: Vector3::zeros(),
            i_lever_exact: Mat3::zeros(),
            has_truth: false,
            prev: None,
            prev_increment: None,
            start_t: 0.0,
            v_gps_n_0: None,
            omega0_emit: None,
            omega0_final: false,
            settle_buf: Vec::new(),
            omega_eb_b_0: None,
            omega_ie_b0: None,
            last_omega_eb_b: None,
            last_v_gps: None,
        }
    }

    pub fn t(&self) -> f64 {
        self.chain.t()
    }

    pub fn lever(&self) -> &LeverArm {
        &self.lever
    }

    pub fn chain(&self) -> &AttitudeChainState {
        &self.chain
    }

    /// Latched initial GNSS velocity (n(0) coordinates).
    pub fn v_gps_n_0(&self) -> Option<FrameVector> {
        self.v_gps_n_0
    }

    /// Ingest a contiguous slice of IMU samples. `gnss` is called at each
    /// sample time and must return the interpolated antenna velocity together
    /// with the earth kinematics to integrate against (GNSS-derived at
    /// runtime, truth-derived in oracle tests); `truth` (when the exact lever
    /// form is wanted) must supply earth-relative rates for every sample or
    /// none.
    pub fn accumulate<G>(
        &mut self,
        imu: &[ImuSample],
        mut gnss: G,
        truth: Option<&[DerivedRates]>,
    ) -> Result<(), AlignmentError>
    where
        G: FnMut(f64) -> Result<(FrameVector, EarthKinematics), StrapdownError>,
    {
        if let Some(rates) = truth {
            debug_assert_eq!(rates.len(), imu.len(), "one truth record per IMU sample");
        }
        for (k, sample) in imu.iter().enumerate() {
            let (vel, earth) = gnss(sample.t)?;
            self.push(sample, &vel, &earth, truth.map(|r| &r[k]))?;
        }
        Ok(())
    }

    /// Ingest one IMU sample with its time-matched GNSS velocity interpolant
    /// and earth kinematics.
    pub fn push(
        &mut self,
        imu: &ImuSample,
        gnss_vel: &FrameVector,
        earth: &EarthKinematics,
        truth: Option<&DerivedRates>,
    ) -> Result<(), AlignmentError> {
        match self.prev {
            None => self.ingest_first(imu, gnss_vel, earth, truth),
            Some(prev) => self.ingest_next(prev, imu, gnss_vel, earth, truth),
        }
    }

    fn ingest_first(
        &mut self,
        imu: &ImuSample,
        gnss_vel: &FrameVector,
        earth: &EarthKinematics,
        truth: Option<&DerivedRates>,
    ) -> Result<(), AlignmentError> {
        self.chain = AttitudeChainState::new(imu.t);
        self.chain.latch_initial_gyro(imu.omega_ib_b);
        self.start_t = imu.t;
        self.v_gps_n_0 = Some(gnss_vel.retagged(Frame::Nav0));
        self.omega0_emit = Some(imu.omega_ib_b);
        self.omega0_final = self.opts.settle_window <= 0.0;
        if !self.omega0_final {
            self.settle_buf.push(imu.omega_ib_b);
        }
        if let Some(rates) = truth {
            self.has_truth = true;
            self.omega_eb_b_0 = Some(rates.omega_eb_b);
            // b(0) is inertially frozen, so w_ie resolved there is constant:
            // latch its t = 0 value.
            self.omega_ie_b0 = Some(rates.omega_ie_b.retagged(Frame::Body0));
            self.last_omega_eb_b = Some(rates.omega_eb_b);
        }
        self.last_v_gps = Some(*gnss_vel);
        self.prev = Some(self.integrands(imu, gnss_vel, earth, truth));
        Ok(())
    }

    fn ingest_next(
        &mut self,
        prev: IntegrandCache,
        imu: &ImuSample,
        gnss_vel: &FrameVector,
        earth: &EarthKinematics,
        truth: Option<&DerivedRates>,
    ) -> Result<(), AlignmentError> {
        let dt = imu.t - prev.t;
        if dt <= 0.0 {
            return Err(AlignmentError::NonMonotonicTime {
                prev: prev.t,
                next: imu.t,
            });
        }
        if dt > 2.0 * self.opts.nominal_dt {
            return Err(AlignmentError::DataDropout {
                gap: dt,
                nominal: self.opts.nominal_dt,
            });
        }
        if self.has_truth && truth.is_none() {
            return Err(AlignmentError::MissingTruthRates);
        }

        // advance both chains to imu.t
        let mut dtheta = rotation_increment(&prev.omega_ib_b, &imu.omega_ib_b, dt);
        if self.opts.coning {
            if let Some(prev_inc) = self.prev_increment {
                dtheta = coning_correction(&prev_inc, &dtheta);
            }
        }
        self.prev_increment = Some(dtheta);
        let omega_in_avg = (prev.omega_in_n + earth.omega_in_n()) * 0.5;
        self.chain = self.chain.step(dt, &dtheta, &omega_in_avg)?;

        // trapezoidal advance of the running integrals
        let curr = self.integrands(imu, gnss_vel, earth, truth);
        let half = 0.5 * dt;
        self.i_fv += (prev.fv + curr.fv) * half;
        self.i_cor += (prev.cor + curr.cor) * half;
        self.i_g += (prev.g + curr.g) * half;
        if let (Some(a), Some(b)) = (prev.lever_exact, curr.lever_exact) {
            self.i_lever_exact += (a + b) * half;
        }

        // settle-window median for the emitted w_ib^b(0)
        if !self.omega0_final {
            if imu.t - self.start_t <= self.opts.settle_window {
                self.settle_buf.push(imu.omega_ib_b);
            } else {
                self.omega0_emit = Some(component_median(&self.settle_buf));
                self.omega0_final = true;
                self.settle_buf.clear();
            }
        }

        if let Some(rates) = truth {
            self.last_omega_eb_b = Some(rates.omega_eb_b);
        }
        self.last_v_gps = Some(*gnss_vel);
        self.prev = Some(curr);
        Ok(())
    }

    fn integrands(
        &self,
        imu: &ImuSample,
        gnss_vel: &FrameVector,
        earth: &EarthKinematics,
        truth: Option<&DerivedRates>,
    ) -> IntegrandCache {
        let c_b = self.chain.c_bt_b0();
        let c_n = self.chain.c_nt_n0();
        IntegrandCache {
            t: imu.t,
            omega_ib_b: imu.omega_ib_b,
            omega_in_n: earth.omega_in_n(),
            fv: c_b.matrix() * imu.f_b.vector(),
            cor: c_n.matrix() * earth.omega_ie_n.cross(gnss_vel).vector(),
            g: c_n.matrix() * earth.gravity_n.vector(),
            lever_exact: truth.map(|r| c_b.matrix() * skew(&r.omega_eb_b)),
        }
    }

    fn check_epoch(&self, t: f64) -> Result<(), AlignmentError> {
        if self.prev.is_none() {
            return Err(AlignmentError::EmptyAccumulator);
        }
        if (t - self.chain.t()).abs() > 1e-9 {
            return Err(AlignmentError::EpochMismatch {
                requested: t,
                current: self.chain.t(),
            });
        }
        Ok(())
    }

    fn alpha(&self) -> FrameVector {
        let c_n = self.chain.c_nt_n0();
        let v = self.last_v_gps.expect("checked by caller");
        let v0 = self.v_gps_n_0.expect("checked by caller");
        let rotated = c_n.apply(&v);
        FrameVector::from_vector(
            Frame::Nav0,
            rotated.vector() - v0.vector() + self.i_cor - self.i_g,
        )
    }

    fn pair_weight(&self, t: f64) -> f64 {
        match self.opts.weighting {
            PairWeighting::Uniform => 1.0,
            PairWeighting::TimeRamp => t - self.start_t,
        }
    }

    /// Observation pair with the gyro-only (earth-rate-neglecting) lever
    /// term: `beta = I_fv + (C_b(t)^b(0) [w_ib x] - [w_ib(0) x]) l^b`.
    pub fn emit_pair(&self, t: f64) -> Result<ObservationPair, AlignmentError> {
        self.check_epoch(t)?;
        let beta = if self.lever.is_zero() {
            self.i_fv
        } else {
            let c_b = self.chain.c_bt_b0();
            let omega_now = self.prev.expect("checked").omega_ib_b;
            let omega0 = self.omega0_emit.expect("latched with first sample");
            let coeff = c_b.matrix() * skew(&omega_now) - skew(&omega0);
            self.i_fv + coeff * self.lever.vector()
        };
        Ok(ObservationPair {
            t,
            alpha: self.alpha(),
            beta: FrameVector::from_vector(Frame::Body0, beta),
            weight: self.pair_weight(t),
        })
    }

    /// Observation pair with the exact lever term (requires truth-resolved
    /// earth-relative rates): `beta = I_fv + (C [w_eb x] - [w_eb(0) x]
    /// + [w_ie^b(0) x] I_lever) l^b`.
    pub fn emit_pair_exact(&self, t: f64) -> Result<ObservationPair, AlignmentError> {
        self.check_epoch(t)?;
        if !self.has_truth {
            return Err(AlignmentError::MissingTruthRates);
        }
        let beta = if self.lever.is_zero() {
            self.i_fv
        } else {
            let c_b = self.chain.c_bt_b0();
            let omega_eb = self.last_omega_eb_b.expect("truth-fed");
            let omega_eb_0 = self.omega_eb_b_0.expect("truth-fed");
            let omega_ie_b0 = self.omega_ie_b0.expect("truth-fed");
            let coeff = c_b.matrix() * skew(&omega_eb) - skew(&omega_eb_0)
                + skew(&omega_ie_b0) * self.i_lever_exact;
            self.i_fv + coeff * self.lever.vector()
        };
        Ok(ObservationPair {
            t,
            alpha: self.alpha(),
            beta: FrameVector::from_vector(Frame::Body0, beta),
            weight: self.pair_weight(t),
        })
    }

    /// Size of the neglected lever term relative to the kept one
    /// (Frobenius norms): `|[w_ie^b(0) x] I_lever| / |C [w_eb x]|`.
    pub fn approximation_ratio(&self) -> Result<f64, AlignmentError> {
        if self.prev.is_none() {
            return Err(AlignmentError::EmptyAccumulator);
        }
        if !self.has_truth {
            return Err(AlignmentError::MissingTruthRates);
        }
        let omega_eb = self.last_omega_eb_b.expect("truth-fed");
        let omega_ie_b0 = self.omega_ie_b0.expect("truth-fed");
        let den = (self.chain.c_bt_b0().matrix() * skew(&omega_eb)).norm();
        if den < 1e-15 {
            return Err(AlignmentError::DegenerateRate);
        }
        let num = (skew(&omega_ie_b0) * self.i_lever_exact).norm();
        Ok(num / den)
    }

    /// Magnitudes of the specific-force integral and of the applied lever
    /// coefficient `(C [w_ib x] - [w_ib(0) x]) l^b`, for growth diagnostics.
    pub fn lever_term_growth(&self) -> (f64, f64) {
        let force = self.i_fv.norm();
        let lever = match self.prev {
            None => 0.0,
            Some(prev) => {
                let omega0 = self.omega0_emit.unwrap_or(prev.omega_ib_b);
                let coeff = self.chain.c_bt_b0().matrix() * skew(&prev.omega_ib_b) - skew(&omega0);
                (coeff * self.lever.vector()).norm()
            }
        };
        (force, lever)
    }
}

fn component_median(samples: &[FrameVector]) -> FrameVector {
    debug_assert!(!samples.is_empty());
    let median_of = |extract: fn(&FrameVector) -> f64| -> f64 {
        let mut vals: Vec<f64> = samples.iter().map(extract).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = vals.len();
        if n % 2 == 1 {
            vals[n / 2]
        } else {
            0.5 * (vals[n / 2 - 1] + vals[n / 2])
        }
    };
    FrameVector::new(
        samples[0].frame(),
        median_of(|v| v.x()),
        median_of(|v| v.y()),
        median_of(|v| v.z()),
    )
}

/// Solved initial attitude with solver diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct AttitudeSolution {
    /// `C_b^n(0)`: rotation from b(0) to n(0).
    pub c_b_n0: RotationMatrix,
    /// Gap between the largest and second eigenvalue of the (normalized)
    /// Davenport K matrix; positive for a well-posed solve.
    pub largest_eigenvalue_gap: f64,
    pub pair_count: usize,
}

/// Weighted least-squares attitude from accumulated pairs (Davenport
/// q-method): minimizes `sum w_k |alpha_k - C beta_k|^2` over rotations.
///
/// Degeneracy is decided on the beta Gram matrix: a smallest-to-largest
/// eigenvalue ratio below 1e-6 means some rotation axis is unobservable and
/// the solve is refused with that axis reported.
pub fn solve_attitude(pairs: &[ObservationPair]) -> Result<AttitudeSolution, AlignmentError> {
    if pairs.is_empty() {
        return Err(AlignmentError::NoObservations);
    }
    if pairs.iter().any(|p| p.weight < 0.0) || pairs.iter().all(|p| p.weight == 0.0) {
        return Err(AlignmentError::InvalidWeights);
    }

    let mut gram = Mat3::zeros();
    let mut b = Mat3::zeros();
    let mut scale = 0.0;
    for p in pairs {
        let beta = p.beta.vector();
        let alpha = p.alpha.vector();
        gram += p.weight * beta * beta.transpose();
        b += p.weight * alpha * beta.transpose();
        scale += p.weight * alpha.norm() * beta.norm();
    }
    if scale <= 0.0 {
        return Err(AlignmentError::NoObservations);
    }

    let gram_eig = nalgebra::SymmetricEigen::new(gram);
    let (mut min_i, mut max_i) = (0, 0);
    for i in 1..3 {
        if gram_eig.eigenvalues[i] < gram_eig.eigenvalues[min_i] {
            min_i = i;
        }
        if gram_eig.eigenvalues[i] > gram_eig.eigenvalues[max_i] {
            max_i = i;
        }
    }
    let lam_max = gram_eig.eigenvalues[max_i].max(0.0);
    let lam_min = gram_eig.eigenvalues[min_i].max(0.0);
    if lam_max <= 0.0 || lam_min / lam_max < 1e-6 {
        let axis = gram_eig.eigenvectors.column(min_i);
        return Err(AlignmentError::DegenerateGeometry {
            axis: [axis[0], axis[1], axis[2]],
        });
    }

    b /= scale;
    let sigma = b.trace();
    let s = b + b.transpose();
    let z = Vector3::new(
        b[(1, 2)] - b[(2, 1)],
        b[(2, 0)] - b[(0, 2)],
        b[(0, 1)] - b[(1, 0)],
    );
    // K in vector-first layout: [[S - sigma I, z], [z^T, sigma]]
    let mut k = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            k[(i, j)] = s[(i, j)];
        }
        k[(i, i)] -= sigma;
        k[(i, 3)] = z[i];
        k[(3, i)] = z[i];
    }
    k[(3, 3)] = sigma;

    let eig = nalgebra::SymmetricEigen::new(k);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let gap = eig.eigenvalues[order[0]] - eig.eigenvalues[order[1]];
    let q = eig.eigenvectors.column(order[0]);
    // eigenvector is (q_vec, q4) in the convention where the attitude matrix
    // is the Hamilton rotation of the conjugate quaternion
    let quat = UnitQuaternion::new_normalized(q[3], -q[0], -q[1], -q[2], Frame::Body0, Frame::Nav0);
    Ok(AttitudeSolution {
        c_b_n0: quat.to_dcm(),
        largest_eigenvalue_gap: gap,
        pair_count: pairs.len(),
    })
}

/// Wahba loss `sum w_k |alpha_k - C beta_k|^2` of a candidate attitude.
pub fn wahba_loss(pairs: &[ObservationPair], c: &RotationMatrix) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let r = p.alpha.vector() - c.matrix() * p.beta.vector();
            p.weight * r.norm_squared()
        })
        .sum()
}
