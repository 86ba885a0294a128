//! TOML configuration covering every tunable of the stack.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{PidGains, SupervisorConfig};
use crate::plant::{EyeGeometry, ServoModel};
use crate::sim::{
    scenario_pursuit, scenario_saccade, scenario_vergence, scenario_vor, Scenario, ServoIds, SimConfig,
};
use crate::vision::{CameraModel, FaceTarget, DEFAULT_NOISE_PX};

/// Annotated configuration with every default spelled out.
pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "OCULAR_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceConfig {
    /// m
    pub width_m: f64,
    /// Detector noise standard deviation, px.
    pub noise_px: f64,
}

impl Default for FaceConfig {
    fn default() -> Self {
        Self { width_m: FaceTarget::DEFAULT_WIDTH, noise_px: DEFAULT_NOISE_PX }
    }
}

/// Partial PID gains; unset fields keep their current value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsPatch {
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub kd: Option<f64>,
    pub integral_limit: Option<f64>,
    pub output_limit: Option<f64>,
}

impl GainsPatch {
    pub fn apply(&self, g: PidGains) -> PidGains {
        PidGains {
            kp: self.kp.unwrap_or(g.kp),
            ki: self.ki.unwrap_or(g.ki),
            kd: self.kd.unwrap_or(g.kd),
            integral_limit: self.integral_limit.unwrap_or(g.integral_limit),
            output_limit: self.output_limit.unwrap_or(g.output_limit),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub pursuit: GainsPatch,
    pub saccade: GainsPatch,
}

/// `[supervisor]`: everything in [`SupervisorConfig`] except the gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorSection {
    pub saccade_threshold: f64,
    pub fixation_threshold: f64,
    pub vor_rate_threshold: f64,
    pub vor_gain: f64,
    pub vor_enabled: bool,
    pub saccade_rate: f64,
    pub deadband: f64,
}

impl Default for SupervisorSection {
    fn default() -> Self {
        let d = SupervisorConfig::default();
        Self {
            saccade_threshold: d.saccade_threshold,
            fixation_threshold: d.fixation_threshold,
            vor_rate_threshold: d.vor_rate_threshold,
            vor_gain: d.vor_gain,
            vor_enabled: d.vor_enabled,
            saccade_rate: d.saccade_rate,
            deadband: d.deadband,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub control_rate: f64,
    pub camera_rate: f64,
    pub bus_latency: f64,
    pub seed: u64,
    pub servo_ids: ServoIds,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            control_rate: d.control_rate,
            camera_rate: d.camera_rate,
            bus_latency: d.bus_latency,
            seed: 0,
            servo_ids: d.servo_ids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaccadeParams {
    pub offset_frac: f64,
    /// m
    pub distance: f64,
}

impl Default for SaccadeParams {
    fn default() -> Self {
        Self { offset_frac: 0.9, distance: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitParams {
    /// Hz
    pub freq: f64,
    pub amp_deg: f64,
    /// m
    pub range: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        Self { freq: 0.2, amp_deg: 15.0, range: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VergenceParams {
    pub z_start: f64,
    pub z_end: f64,
}

impl Default for VergenceParams {
    fn default() -> Self {
        Self { z_start: 2.0, z_end: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VorParams {
    pub freq: f64,
    pub amp_deg: f64,
    pub distance: f64,
}

impl Default for VorParams {
    fn default() -> Self {
        Self { freq: 0.5, amp_deg: 10.0, distance: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub saccade: SaccadeParams,
    pub pursuit: PursuitParams,
    pub vergence: VergenceParams,
    pub vor: VorParams,
}

/// The four scripted experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Experiment {
    Saccade,
    Pursuit,
    Vergence,
    Vor,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::Saccade, Experiment::Pursuit, Experiment::Vergence, Experiment::Vor];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Saccade => "saccade",
            Experiment::Pursuit => "pursuit",
            Experiment::Vergence => "vergence",
            Experiment::Vor => "vor",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown experiment {0:?} (expected saccade, pursuit, vergence or vor)")]
pub struct UnknownExperiment(pub String);

impl FromStr for Experiment {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub geometry: EyeGeometry,
    pub servo_model: ServoModel,
    pub camera: CameraModel,
    pub face: FaceConfig,
    pub control: ControlConfig,
    pub supervisor: SupervisorSection,
    pub sim: SimSection,
    pub scenario: ScenarioConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// `path` if given, else `$OCULAR_CONFIG`, else built-in defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Self::from_path(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::from_path(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.face.width_m > 0.0 && self.face.noise_px >= 0.0) {
            return Err(ConfigError::Invalid("face width must be positive and noise non-negative".into()));
        }
        self.sim_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for exp in Experiment::ALL {
            self.scenario(exp).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn supervisor_config(&self) -> SupervisorConfig {
        let d = SupervisorConfig::default();
        let s = &self.supervisor;
        SupervisorConfig {
            saccade_threshold: s.saccade_threshold,
            fixation_threshold: s.fixation_threshold,
            vor_rate_threshold: s.vor_rate_threshold,
            vor_gain: s.vor_gain,
            vor_enabled: s.vor_enabled,
            saccade_rate: s.saccade_rate,
            deadband: s.deadband,
            pursuit: self.control.pursuit.apply(d.pursuit),
            saccade: self.control.saccade.apply(d.saccade),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            control_rate: self.sim.control_rate,
            camera_rate: self.sim.camera_rate,
            bus_latency: self.sim.bus_latency,
            servo_ids: self.sim.servo_ids,
            geometry: self.geometry,
            servo_model: self.servo_model,
            camera: self.camera,
            supervisor: self.supervisor_config(),
        }
    }

    /// Scenario for `exp` with face, noise and seed taken from the config.
    pub fn scenario(&self, exp: Experiment) -> Result<Scenario, crate::sim::ScenarioError> {
        let g = &self.geometry;
        let p = &self.scenario;
        let s = match exp {
            Experiment::Saccade => scenario_saccade(p.saccade.offset_frac, p.saccade.distance, &self.camera, g)?,
            Experiment::Pursuit => scenario_pursuit(p.pursuit.freq, p.pursuit.amp_deg, p.pursuit.range, g)?,
            Experiment::Vergence => scenario_vergence(p.vergence.z_start, p.vergence.z_end, g)?,
            Experiment::Vor => scenario_vor(p.vor.freq, p.vor.amp_deg, p.vor.distance, g)?,
        };
        let s = s
            .with_noise(self.face.noise_px)
            .with_face_width(self.face.width_m)
            .with_seed(self.sim.seed);
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_matches_builtin() {
        let shipped = Config::from_toml(DEFAULT_TOML).unwrap();
        let builtin = Config::default();
        assert_eq!(shipped.sim_config(), builtin.sim_config());
        for e in Experiment::ALL {
            assert_eq!(shipped.scenario(e).unwrap(), builtin.scenario(e).unwrap());
        }
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn partial_gains_override() {
        let c = Config::from_toml("[control.pursuit]\nkp = 5.5\n").unwrap();
        let s = c.supervisor_config();
        assert_eq!(s.pursuit.kp, 5.5);
        assert_eq!(s.pursuit.ki, SupervisorConfig::default().pursuit.ki);
        assert_eq!(s.saccade, SupervisorConfig::default().saccade);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(Config::from_toml("[sim]\ncontrol_hz = 3\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn semantic_errors_rejected() {
        for bad in [
            "[sim]\ncamera_rate = 200.0\n",
            "[geometry]\nbobbin_radius = 0.0\n",
            "[scenario.saccade]\noffset_frac = 0.0\n",
            "[face]\nnoise_px = -1.0\n",
            "[sim.servo_ids]\nleft_h = 2\n",
        ] {
            assert!(matches!(Config::from_toml(bad), Err(ConfigError::Invalid(_))), "{bad}");
        }
    }

    #[test]
    fn scenario_picks_up_face_settings() {
        let c = Config::from_toml("[face]\nnoise_px = 0.0\nwidth_m = 0.2\n[sim]\nseed = 9\n").unwrap();
        let s = c.scenario(Experiment::Vor).unwrap();
        assert_eq!((s.noise_std, s.face_width, s.seed), (0.0, 0.2, 9));
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("bogus".parse::<Experiment>().is_err());
    }
}
