//! In-motion coarse alignment for strapdown INS/GNSS with antenna lever-arm
//! compensation.
//!
//! The crate estimates the initial attitude `C_b^n(0)` of an inertial
//! navigation system from raw gyro/accelerometer data and GNSS position and
//! velocity while the vehicle is maneuvering. The attitude is factored through
//! two integrable chains (`C_b^n(t) = C_n(t)^n(0)ᵀ · C_b^n(0) · C_b(t)^b(0)`),
//! so the constant unknown is exposed by a pair of accumulated velocity
//! integrals. When the GNSS antenna sits on a known body-frame lever arm, the
//! observation vector on the body side picks up an extra gyro-driven term;
//! accounting for it removes the alignment-error peaks that the raw
//! formulation exhibits during maneuvers.
//!
//! Module map:
//! - [`attitude`]: frame-tagged vectors, rotation matrices, quaternions,
//!   rotation-vector updates, attitude-error extraction.
//! - [`earth`]: WGS-84 gravity, earth rate, transport rate, curvature radii,
//!   and the NED-displacement-to-geodetic conversion matrix.
//! - [`strapdown`]: the gyro-driven body chain and the GNSS-driven navigation
//!   chain, plus angular-rate bookkeeping.
//! - [`alignment`]: the observation-pair accumulator (velocity-integration
//!   formula with lever-arm compensation) and the Davenport q-method solver.
//! - [`simkit`]: analytic truth trajectories, inverse-strapdown IMU synthesis,
//!   lever-arm-correct GNSS synthesis, and parametric sensor error models.
//! - [`csvio`]: fixed-schema CSV serialization for streams and pairs.

pub mod alignment;
pub mod attitude;
pub mod csvio;
pub mod earth;
pub mod simkit;
pub mod strapdown;

pub use attitude::{Frame, FrameVector, Mat3, RotationMatrix, UnitQuaternion};
pub use earth::{EarthKinematics, GeodeticPosition};
pub use strapdown::{AttitudeChainState, DerivedRates, GnssSample, ImuSample};
