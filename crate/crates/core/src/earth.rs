//! WGS-84 earth kinematics for local-level (NED) strapdown mechanization.
//!
//! Provides normal gravity (Somigliana with a linear free-air height
//! correction), earth rotation rate, transport rate, principal curvature
//! radii, and the diagonal matrix converting an NED displacement in meters to
//! geodetic increments. Conventions follow Groves, *Principles of GNSS,
//! Inertial, and Multisensor Integrated Navigation Systems*.

use crate::attitude::{Frame, FrameVector, Mat3};
use thiserror::Error;

/// WGS-84 semi-major axis [m].
pub const EQUATORIAL_RADIUS: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const FLATTENING: f64 = 1.0 / 298.257_223_563;
/// Semi-minor axis [m].
pub const POLAR_RADIUS: f64 = EQUATORIAL_RADIUS * (1.0 - FLATTENING);
/// First eccentricity squared.
pub const ECCENTRICITY_SQ: f64 = FLATTENING * (2.0 - FLATTENING);
/// Earth rotation rate [rad/s].
pub const EARTH_RATE: f64 = 7.292_115e-5;
/// Normal gravity at the equator on the ellipsoid [m/s^2].
pub const GRAVITY_EQUATOR: f64 = 9.7803253359;
/// Normal gravity at the poles on the ellipsoid [m/s^2].
pub const GRAVITY_POLE: f64 = 9.8321849378;
/// Somigliana constant k = (b*g_p)/(a*g_e) - 1.
pub const SOMIGLIANA_K: f64 =
    (POLAR_RADIUS * GRAVITY_POLE) / (EQUATORIAL_RADIUS * GRAVITY_EQUATOR) - 1.0;
/// Linear free-air gravity gradient [1/s^2] (decrease per meter of height).
pub const FREE_AIR_GRADIENT: f64 = 3.086e-6;

const MIN_HEIGHT: f64 = -1.0e4;
const POLAR_GUARD: f64 = std::f64::consts::FRAC_PI_2 - 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EarthError {
    #[error("invalid geodetic position: lat {lat} rad, lon {lon} rad, height {height} m")]
    InvalidPosition { lat: f64, lon: f64, height: f64 },
    #[error("latitude {0} rad is within the polar singularity guard band")]
    PolarSingularity(f64),
}

/// Geodetic position on the WGS-84 ellipsoid.
///
/// Latitude in [-pi/2, pi/2], longitude wrapped to (-pi, pi], height above
/// the ellipsoid in meters (> -10 km).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodeticPosition {
    latitude: f64,
    longitude: f64,
    height: f64,
}

impl GeodeticPosition {
    pub fn new(latitude: f64, longitude: f64, height: f64) -> Result<Self, EarthError> {
        if !latitude.is_finite()
            || !longitude.is_finite()
            || !height.is_finite()
            || latitude.abs() > std::f64::consts::FRAC_PI_2
            || height <= MIN_HEIGHT
        {
            return Err(EarthError::InvalidPosition {
                lat: latitude,
                lon: longitude,
                height,
            });
        }
        Ok(Self {
            latitude,
            longitude: wrap_longitude(longitude),
            height,
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Result<Self, EarthError> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height)
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Apply geodetic increments (dlat [rad], dlon [rad], dh [m]), e.g. the
    /// output of `position_matrix_rc * ned_displacement`.
    pub fn offset(&self, dlat: f64, dlon: f64, dh: f64) -> Result<Self, EarthError> {
        Self::new(self.latitude + dlat, self.longitude + dlon, self.height + dh)
    }
}

fn wrap_longitude(lon: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut l = (lon + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if l <= -std::f64::consts::PI {
        l += two_pi;
    }
    l
}

/// WGS-84 meridian (R_N) and transverse (R_E) curvature radii [m].
pub fn curvature_radii(lat: f64) -> (f64, f64) {
    let s2 = lat.sin() * lat.sin();
    let den = (1.0 - ECCENTRICITY_SQ * s2).sqrt();
    let r_e = EQUATORIAL_RADIUS / den;
    let r_n = EQUATORIAL_RADIUS * (1.0 - ECCENTRICITY_SQ) / (den * den * den);
    (r_n, r_e)
}

/// Earth rotation rate resolved in NED: `[W cos(lat), 0, -W sin(lat)]`.
pub fn earth_rate_n(lat: f64) -> FrameVector {
    FrameVector::new(
        Frame::Nav,
        EARTH_RATE * lat.cos(),
        0.0,
        -EARTH_RATE * lat.sin(),
    )
}

/// Normal gravity in NED (down-positive): Somigliana on the ellipsoid plus a
/// linear free-air height correction. North and east components are zero.
pub fn gravity_n(pos: &GeodeticPosition) -> FrameVector {
    let s2 = pos.latitude.sin() * pos.latitude.sin();
    let g0 = GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / (1.0 - ECCENTRICITY_SQ * s2).sqrt();
    FrameVector::new(Frame::Nav, 0.0, 0.0, g0 - FREE_AIR_GRADIENT * pos.height)
}

/// Transport rate: rotation of the local-level frame relative to Earth due to
/// vehicle translation, `[v_E/(R_E+h), -v_N/(R_N+h), -v_E tan(lat)/(R_E+h)]`.
pub fn transport_rate(v_n: &FrameVector, pos: &GeodeticPosition) -> Result<FrameVector, EarthError> {
    debug_assert_eq!(v_n.frame(), Frame::Nav);
    if pos.latitude.abs() >= POLAR_GUARD {
        return Err(EarthError::PolarSingularity(pos.latitude));
    }
    let (r_n, r_e) = curvature_radii(pos.latitude);
    Ok(FrameVector::new(
        Frame::Nav,
        v_n.y() / (r_e + pos.height),
        -v_n.x() / (r_n + pos.height),
        -v_n.y() * pos.latitude.tan() / (r_e + pos.height),
    ))
}

/// Diagonal conversion from an NED displacement [m] to geodetic increments
/// (dlat [rad], dlon [rad], dh [m]): `diag(1/(R_N+h), 1/((R_E+h) cos lat), -1)`.
/// The -1 entry ties down-positive displacement to up-positive height.
pub fn position_matrix_rc(pos: &GeodeticPosition) -> Result<Mat3, EarthError> {
    if pos.latitude.abs() >= POLAR_GUARD {
        return Err(EarthError::PolarSingularity(pos.latitude));
    }
    let (r_n, r_e) = curvature_radii(pos.latitude);
    Ok(Mat3::from_diagonal(&nalgebra::Vector3::new(
        1.0 / (r_n + pos.height),
        1.0 / ((r_e + pos.height) * pos.latitude.cos()),
        -1.0,
    )))
}

/// Earth quantities evaluated at one position/velocity, bundled for the
/// mechanization and alignment loops.
#[derive(Clone, Copy, Debug)]
pub struct EarthKinematics {
    pub omega_ie_n: FrameVector,
    pub omega_en_n: FrameVector,
    pub gravity_n: FrameVector,
    pub r_n: f64,
    pub r_e: f64,
    pub rc: Mat3,
}

impl EarthKinematics {
    pub fn at(pos: &GeodeticPosition, v_n: &FrameVector) -> Result<Self, EarthError> {
        let (r_n, r_e) = curvature_radii(pos.latitude);
        Ok(Self {
            omega_ie_n: earth_rate_n(pos.latitude),
            omega_en_n: transport_rate(v_n, pos)?,
            gravity_n: gravity_n(pos),
            r_n,
            r_e,
            rc: position_matrix_rc(pos)?,
        })
    }

    /// Inertial rotation rate of the navigation frame, `w_ie^n + w_en^n`.
    pub fn omega_in_n(&self) -> FrameVector {
        self.omega_ie_n + self.omega_en_n
    }
}
