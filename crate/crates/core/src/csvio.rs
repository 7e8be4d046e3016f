//! Fixed-schema CSV serialization for observation pairs and sensor streams.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), enough for an
//! exact f64 round trip, so repeated runs of a deterministic pipeline produce
//! byte-identical files. Column orders are part of the schema and never
//! change.

use crate::alignment::ObservationPair;
use crate::simkit::TruthState;
use crate::strapdown::{GnssSample, ImuSample};
use std::fmt::Write as _;

/// 17-significant-digit scientific notation (round-trips any f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Schema: `t,alpha_x,alpha_y,alpha_z,beta_x,beta_y,beta_z,weight`.
/// `alpha` is in n(0) axes [m/s], `beta` in b(0) axes [m/s].
pub fn pairs_to_csv(pairs: &[ObservationPair]) -> String {
    let mut out = String::from("t,alpha_x,alpha_y,alpha_z,beta_x,beta_y,beta_z,weight\n");
    for p in pairs {
        let a = p.alpha.vector();
        let b = p.beta.vector();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(p.t),
            fmt_f64(a.x),
            fmt_f64(a.y),
            fmt_f64(a.z),
            fmt_f64(b.x),
            fmt_f64(b.y),
            fmt_f64(b.z),
            fmt_f64(p.weight),
        );
    }
    out
}

/// Schema: `t,lat_rad,lon_rad,height_m,vn_mps,ve_mps,vd_mps,an_mps2,ae_mps2,
/// ad_mps2,yaw_rad,pitch_rad,roll_rad`.
pub fn truth_to_csv(truth: &[TruthState]) -> String {
    let mut out = String::from(
        "t,lat_rad,lon_rad,height_m,vn_mps,ve_mps,vd_mps,an_mps2,ae_mps2,ad_mps2,yaw_rad,pitch_rad,roll_rad\n",
    );
    for s in truth {
        let (yaw, pitch, roll) = crate::attitude::euler_from_dcm(&s.c_b_n);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.pos.latitude()),
            fmt_f64(s.pos.longitude()),
            fmt_f64(s.pos.height()),
            fmt_f64(s.v_n.x()),
            fmt_f64(s.v_n.y()),
            fmt_f64(s.v_n.z()),
            fmt_f64(s.a_n.x()),
            fmt_f64(s.a_n.y()),
            fmt_f64(s.a_n.z()),
            fmt_f64(yaw),
            fmt_f64(pitch),
            fmt_f64(roll),
        );
    }
    out
}

/// Schema: `t,wx_rps,wy_rps,wz_rps,fx_mps2,fy_mps2,fz_mps2`.
pub fn imu_to_csv(stream: &[ImuSample]) -> String {
    let mut out = String::from("t,wx_rps,wy_rps,wz_rps,fx_mps2,fy_mps2,fz_mps2\n");
    for s in stream {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.omega_ib_b.x()),
            fmt_f64(s.omega_ib_b.y()),
            fmt_f64(s.omega_ib_b.z()),
            fmt_f64(s.f_b.x()),
            fmt_f64(s.f_b.y()),
            fmt_f64(s.f_b.z()),
        );
    }
    out
}

/// Schema: `t,lat_rad,lon_rad,height_m,vn_mps,ve_mps,vd_mps`.
pub fn gnss_to_csv(stream: &[GnssSample]) -> String {
    let mut out = String::from("t,lat_rad,lon_rad,height_m,vn_mps,ve_mps,vd_mps\n");
    for s in stream {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.p_gps.latitude()),
            fmt_f64(s.p_gps.longitude()),
            fmt_f64(s.p_gps.height()),
            fmt_f64(s.v_gps_n.x()),
            fmt_f64(s.v_gps_n.y()),
            fmt_f64(s.v_gps_n.z()),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::{Frame, FrameVector};

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            std::f64::consts::PI,
            -9.780_325_335_9,
            1.7e-308,
            6.378_137e6,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn pairs_csv_schema() {
        let pairs = [ObservationPair {
            t: 1.0,
            alpha: FrameVector::new(Frame::Nav0, 1.0, 2.0, 3.0),
            beta: FrameVector::new(Frame::Body0, 4.0, 5.0, 6.0),
            weight: 1.0,
        }];
        let csv = pairs_to_csv(&pairs);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,alpha_x,alpha_y,alpha_z,beta_x,beta_y,beta_z,weight"
        );
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 8);
        assert!(row.starts_with(&fmt_f64(1.0)));
    }
}
