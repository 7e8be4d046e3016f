//! Experiment configuration: flat key-value TOML with array literals.
//!
//! Every key has a documented default; unknown keys are rejected. The
//! effective (fully resolved) configuration is dumped alongside the outputs
//! so under-specified parameters are always auditable.

use inflight_align::alignment::{LeverArm, PairWeighting};
use inflight_align::attitude::{Frame, FrameVector};
use inflight_align::earth::GeodeticPosition;
use inflight_align::simkit::{ProfileKind, SensorErrorModel, TrajectoryProfile};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Lever-arm compensation mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationMode {
    /// Ignore the lever arm (plain velocity-integration observation).
    None,
    /// Gyro-driven compensation term (the production form).
    Eq9,
    /// Exact compensation using truth-resolved earth-relative rates
    /// (simulation oracle).
    Exact,
}

impl CompensationMode {
    pub fn tag(&self) -> &'static str {
        match self {
            CompensationMode::None => "none",
            CompensationMode::Eq9 => "eq9",
            CompensationMode::Exact => "exact",
        }
    }
}

fn default_profile() -> String {
    "climbing-turn".into()
}
fn default_speed() -> f64 {
    150.0
}
fn default_turn_rate() -> f64 {
    0.04
}
fn default_climb_rate() -> f64 {
    5.0
}
fn default_accel() -> f64 {
    1.0
}
fn default_weave_period() -> f64 {
    60.0
}
fn default_onset() -> f64 {
    2.0
}
fn default_ramp_time() -> f64 {
    15.0
}
fn default_init_lat_deg() -> f64 {
    30.0
}
fn default_init_lon_deg() -> f64 {
    120.0
}
fn default_init_height() -> f64 {
    1000.0
}
fn default_init_heading_deg() -> f64 {
    30.0
}
fn default_gyro_bias() -> [f64; 3] {
    [5.0e-8; 3]
}
fn default_gyro_arw() -> f64 {
    1.0e-6
}
fn default_accel_bias() -> [f64; 3] {
    [1.0e-3; 3]
}
fn default_accel_vrw() -> f64 {
    1.0e-4
}
fn default_gnss_vel_noise() -> f64 {
    0.01
}
fn default_gnss_pos_noise() -> f64 {
    3.0
}
fn default_lever_arm() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn default_mode() -> CompensationMode {
    CompensationMode::Eq9
}
fn default_run_count() -> u32 {
    100
}
fn default_horizon() -> f64 {
    60.0
}
fn default_imu_dt() -> f64 {
    0.01
}
fn default_gnss_dt() -> f64 {
    1.0
}
fn default_base_seed() -> u64 {
    20130401
}
fn default_out_dir() -> String {
    "out".into()
}
fn default_threads() -> usize {
    1
}
fn default_settle_window() -> f64 {
    0.1
}
fn default_pair_weighting() -> String {
    "uniform".into()
}

/// Flat experiment configuration. Units are SI unless the key name says
/// otherwise (angles in the `_deg` keys are degrees).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    // trajectory
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_turn_rate")]
    pub turn_rate: f64,
    #[serde(default = "default_climb_rate")]
    pub climb_rate: f64,
    #[serde(default = "default_accel")]
    pub accel: f64,
    #[serde(default = "default_weave_period")]
    pub weave_period: f64,
    #[serde(default = "default_onset")]
    pub onset: f64,
    #[serde(default = "default_ramp_time")]
    pub ramp_time: f64,
    #[serde(default = "default_init_lat_deg")]
    pub init_lat_deg: f64,
    #[serde(default = "default_init_lon_deg")]
    pub init_lon_deg: f64,
    #[serde(default = "default_init_height")]
    pub init_height: f64,
    #[serde(default = "default_init_heading_deg")]
    pub init_heading_deg: f64,

    // sensor error model (grades are repository defaults, not literature
    // values)
    #[serde(default = "default_gyro_bias")]
    pub gyro_bias: [f64; 3],
    #[serde(default = "default_gyro_arw")]
    pub gyro_arw: f64,
    #[serde(default = "default_accel_bias")]
    pub accel_bias: [f64; 3],
    #[serde(default = "default_accel_vrw")]
    pub accel_vrw: f64,
    #[serde(default = "default_gnss_vel_noise")]
    pub gnss_vel_noise: f64,
    #[serde(default = "default_gnss_pos_noise")]
    pub gnss_pos_noise: f64,

    // lever arm [m], body axes
    #[serde(default = "default_lever_arm")]
    pub lever_arm_truth: [f64; 3],
    /// Lever arm the algorithm compensates with; defaults to the truth value.
    #[serde(default)]
    pub lever_arm_assumed: Option<[f64; 3]>,

    // experiment
    #[serde(default = "default_mode")]
    pub mode: CompensationMode,
    #[serde(default = "default_run_count")]
    pub run_count: u32,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_imu_dt")]
    pub imu_dt: f64,
    #[serde(default = "default_gnss_dt")]
    pub gnss_dt: f64,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default = "default_threads")]
    pub threads: usize,

    // alignment details
    #[serde(default = "default_settle_window")]
    pub settle_window: f64,
    #[serde(default = "default_pair_weighting")]
    pub pair_weighting: String,
    /// Solve with the most recent N pairs; 0 keeps all history.
    #[serde(default)]
    pub solver_window: usize,
    #[serde(default)]
    pub coning: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        if cfg.lever_arm_assumed.is_none() {
            cfg.lever_arm_assumed = Some(cfg.lever_arm_truth);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &'static str, reason: String| Err(ConfigError::Invalid { key, reason });
        if self.run_count < 1 {
            return bad("run_count", "must be >= 1".into());
        }
        if self.horizon.is_nan() || self.horizon <= 0.0 {
            return bad("horizon", format!("must be positive, got {}", self.horizon));
        }
        if !(1e-3..=0.1).contains(&self.imu_dt) {
            return bad("imu_dt", format!("must be in [1e-3, 0.1] s, got {}", self.imu_dt));
        }
        if self.gnss_dt + 1e-12 < self.imu_dt {
            return bad("gnss_dt", "must be >= imu_dt".into());
        }
        let stride = (self.gnss_dt / self.imu_dt).round();
        if stride < 1.0 || (stride * self.imu_dt - self.gnss_dt).abs() > 1e-9 {
            return bad("gnss_dt", "must be an integer multiple of imu_dt".into());
        }
        if self.settle_window < 0.0 {
            return bad("settle_window", "must be >= 0".into());
        }
        if self.threads < 1 {
            return bad("threads", "must be >= 1".into());
        }
        match self.pair_weighting.as_str() {
            "uniform" | "time-ramp" => {}
            other => {
                return bad(
                    "pair_weighting",
                    format!("expected `uniform` or `time-ramp`, got `{other}`"),
                )
            }
        }
        self.trajectory_profile()
            .map_err(|e| ConfigError::Invalid {
                key: "profile",
                reason: e.to_string(),
            })?
            .validate()
            .map_err(|e| ConfigError::Invalid {
                key: "profile",
                reason: e.to_string(),
            })?;
        self.sensor_model(0).validate().map_err(|e| ConfigError::Invalid {
            key: "gyro_arw",
            reason: e.to_string(),
        })?;
        self.lever_truth().map_err(|e| ConfigError::Invalid {
            key: "lever_arm_truth",
            reason: e.to_string(),
        })?;
        self.lever_assumed().map_err(|e| ConfigError::Invalid {
            key: "lever_arm_assumed",
            reason: e.to_string(),
        })?;
        Ok(())
    }

    /// Trajectory over `horizon` plus one GNSS interval of padding (so the
    /// interpolator brackets the final epoch).
    pub fn trajectory_profile(&self) -> Result<TrajectoryProfile, ConfigError> {
        let kind = match self.profile.as_str() {
            "straight-accelerate" => ProfileKind::StraightAccelerate { accel: self.accel },
            "s-turn-weave" => ProfileKind::STurnWeave {
                period: self.weave_period,
            },
            "climbing-turn" => ProfileKind::ClimbingTurn {
                climb_rate: self.climb_rate,
            },
            other => {
                return Err(ConfigError::Invalid {
                    key: "profile",
                    reason: format!(
                        "expected `straight-accelerate`, `s-turn-weave` or `climbing-turn`, got `{other}`"
                    ),
                })
            }
        };
        let init_pos =
            GeodeticPosition::from_degrees(self.init_lat_deg, self.init_lon_deg, self.init_height)
                .map_err(|e| ConfigError::Invalid {
                    key: "init_lat_deg",
                    reason: e.to_string(),
                })?;
        Ok(TrajectoryProfile {
            kind,
            speed: self.speed,
            turn_rate: self.turn_rate,
            duration: self.horizon + self.gnss_dt,
            init_pos,
            init_heading: self.init_heading_deg.to_radians(),
            onset: self.onset,
            ramp_time: self.ramp_time,
        })
    }

    pub fn sensor_model(&self, seed: u64) -> SensorErrorModel {
        SensorErrorModel {
            gyro_bias: FrameVector::new(
                Frame::Body,
                self.gyro_bias[0],
                self.gyro_bias[1],
                self.gyro_bias[2],
            ),
            gyro_arw: self.gyro_arw,
            accel_bias: FrameVector::new(
                Frame::Body,
                self.accel_bias[0],
                self.accel_bias[1],
                self.accel_bias[2],
            ),
            accel_vrw: self.accel_vrw,
            gnss_vel_noise: self.gnss_vel_noise,
            gnss_pos_noise: self.gnss_pos_noise,
            seed,
        }
    }

    pub fn lever_truth(&self) -> Result<LeverArm, inflight_align::alignment::AlignmentError> {
        LeverArm::new(FrameVector::new(
            Frame::Body,
            self.lever_arm_truth[0],
            self.lever_arm_truth[1],
            self.lever_arm_truth[2],
        ))
    }

    pub fn lever_assumed(&self) -> Result<LeverArm, inflight_align::alignment::AlignmentError> {
        let l = self.lever_arm_assumed.unwrap_or(self.lever_arm_truth);
        LeverArm::new(FrameVector::new(Frame::Body, l[0], l[1], l[2]))
    }

    pub fn weighting(&self) -> PairWeighting {
        match self.pair_weighting.as_str() {
            "time-ramp" => PairWeighting::TimeRamp,
            _ => PairWeighting::Uniform,
        }
    }

    /// Fully resolved TOML dump, written next to every output set.
    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_documented_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.profile, "climbing-turn");
        assert_eq!(cfg.run_count, 100);
        assert_eq!(cfg.horizon, 60.0);
        assert_eq!(cfg.imu_dt, 0.01);
        assert_eq!(cfg.gnss_dt, 1.0);
        assert_eq!(cfg.lever_arm_truth, [1.0, 1.0, 1.0]);
        assert_eq!(cfg.lever_arm_assumed, Some([1.0, 1.0, 1.0]));
        assert_eq!(cfg.mode, CompensationMode::Eq9);
        assert_eq!(cfg.base_seed, 20130401);
        // the effective dump parses back to the same config
        let dump = cfg.effective_toml();
        let back = ExperimentConfig::from_toml(&dump).unwrap();
        assert_eq!(back.effective_toml(), dump);
    }

    #[test]
    fn lever_arm_parses_to_meters() {
        let cfg = ExperimentConfig::from_toml("lever_arm_truth = [1, 1, 1]").unwrap();
        assert_eq!(cfg.lever_arm_truth, [1.0, 1.0, 1.0]);
        assert!((cfg.lever_truth().unwrap().vector().norm() - 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_run_count_rejected_naming_key() {
        let err = ExperimentConfig::from_toml("run_count = 0").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("run_count"), "message was: {msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml("no_such_key = 1").unwrap_err();
        assert!(err.to_string().contains("no_such_key"));
    }

    #[test]
    fn incompatible_rates_rejected() {
        assert!(ExperimentConfig::from_toml("gnss_dt = 0.025").is_err());
        assert!(ExperimentConfig::from_toml("imu_dt = 0.5").is_err());
    }

    #[test]
    fn assumed_lever_defaults_to_truth() {
        let cfg = ExperimentConfig::from_toml("lever_arm_truth = [2, 0, 0]").unwrap();
        assert_eq!(cfg.lever_arm_assumed, Some([2.0, 0.0, 0.0]));
        let cfg =
            ExperimentConfig::from_toml("lever_arm_truth = [2, 0, 0]\nlever_arm_assumed = [0, 0, 0]")
                .unwrap();
        assert!(cfg.lever_assumed().unwrap().is_zero());
    }

    #[test]
    fn mode_strings() {
        let cfg = ExperimentConfig::from_toml("mode = \"none\"").unwrap();
        assert_eq!(cfg.mode, CompensationMode::None);
        let cfg = ExperimentConfig::from_toml("mode = \"exact\"").unwrap();
        assert_eq!(cfg.mode, CompensationMode::Exact);
        assert!(ExperimentConfig::from_toml("mode = \"bogus\"").is_err());
    }
}
