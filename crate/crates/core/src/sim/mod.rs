//! Deterministic closed-loop simulation of the binocular robot.

mod engine;
pub mod metrics;
pub mod scenario;
pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{run, Simulator};
pub use metrics::{metrics, peak_error_after, rms_retinal_slip, Metrics, MetricsError};
pub use scenario::{
    scenario_fixation, scenario_pursuit, scenario_saccade, scenario_vergence, scenario_vor, Scenario,
    ScenarioError,
};
pub use trace::{Trace, TraceRecord, CSV_HEADER};

use crate::control::{ControlError, SupervisorConfig};
use crate::plant::{EyeGeometry, PlantError, ServoModel};
use crate::protocol::{BusError, UnitsError};
use crate::vision::CameraModel;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Units(#[from] UnitsError),
}

/// Bus ids of the four servos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoIds {
    pub left_h: u8,
    pub left_v: u8,
    pub right_h: u8,
    pub right_v: u8,
}

impl Default for ServoIds {
    fn default() -> Self {
        Self { left_h: 1, left_v: 2, right_h: 3, right_v: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Hz
    pub control_rate: f64,
    /// Hz
    pub camera_rate: f64,
    /// Status latency of the simulated bus, s.
    pub bus_latency: f64,
    pub servo_ids: ServoIds,
    pub geometry: EyeGeometry,
    pub servo_model: ServoModel,
    pub camera: CameraModel,
    pub supervisor: SupervisorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            control_rate: 100.0,
            camera_rate: 30.0,
            bus_latency: 0.0,
            servo_ids: ServoIds::default(),
            geometry: EyeGeometry::default(),
            servo_model: ServoModel::default(),
            camera: CameraModel::default(),
            supervisor: SupervisorConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.control_rate > 0.0 && self.camera_rate > 0.0) {
            return Err(SimError::Config("rates must be positive".into()));
        }
        if self.camera_rate > self.control_rate {
            return Err(SimError::Config("camera_rate must not exceed control_rate".into()));
        }
        if !(self.bus_latency >= 0.0) {
            return Err(SimError::Config("bus latency must be non-negative".into()));
        }
        if !(self.bus_latency < 1.0 / self.control_rate) {
            return Err(SimError::Config("bus latency must be shorter than one control tick".into()));
        }
        let ids = [self.servo_ids.left_h, self.servo_ids.left_v, self.servo_ids.right_h, self.servo_ids.right_v];
        for (i, id) in ids.iter().enumerate() {
            if *id > crate::protocol::packet::MAX_ID || ids[..i].contains(id) {
                return Err(SimError::Config(format!("servo ids must be distinct and <= 252, got {ids:?}")));
            }
        }
        self.geometry.validate()?;
        self.servo_model.validate()?;
        self.camera.validate().map_err(|e| SimError::Config(e.into()))?;
        self.supervisor.validate()?;
        Ok(())
    }
}
