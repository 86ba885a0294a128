//! Scripted experiments: where the face is and how the head moves over time.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use thiserror::Error;

use crate::control::vergence_reference;
use crate::plant::{EyeGeometry, GazeState};
use crate::vision::{CameraModel, FaceTarget, HeadPose, DEFAULT_NOISE_PX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("saccade offset fraction must lie in (0, 1], got {0}")]
    OffsetFraction(f64),
    #[error("pursuit amplitude {amp_deg} deg exceeds gaze limit {limit_deg} deg")]
    AmplitudeTooLarge { amp_deg: f64, limit_deg: f64 },
    #[error("target distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetTrajectory {
    Static(Vector3<f64>),
    /// Sinusoidal azimuth and elevation on a sphere around the head.
    Orbit { range: f64, amplitude: f64, freq: f64 },
    /// Midline approach with linear depth, held at `z_end` after `over`.
    Approach { z_start: f64, z_end: f64, over: f64 },
}

impl TargetTrajectory {
    pub fn position(&self, t: f64) -> Vector3<f64> {
        match *self {
            TargetTrajectory::Static(p) => p,
            TargetTrajectory::Orbit { range, amplitude, freq } => {
                let s = (TAU * freq * t).sin();
                let az = amplitude * s;
                let el = amplitude * s;
                Vector3::new(
                    range * el.cos() * az.sin(),
                    range * el.sin(),
                    range * el.cos() * az.cos(),
                )
            }
            TargetTrajectory::Approach { z_start, z_end, over } => {
                let a = (t / over).clamp(0.0, 1.0);
                Vector3::new(0.0, 0.0, z_start + (z_end - z_start) * a)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadTrajectory {
    Still(HeadPose),
    YawSine { amplitude: f64, freq: f64 },
}

impl HeadTrajectory {
    pub fn pose(&self, t: f64) -> HeadPose {
        match *self {
            HeadTrajectory::Still(p) => p,
            HeadTrajectory::YawSine { amplitude, freq } => {
                HeadPose::new(amplitude * (TAU * freq * t).sin(), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// s
    pub duration: f64,
    pub target: TargetTrajectory,
    pub face_width: f64,
    pub head: HeadTrajectory,
    /// Indexed by eye.
    pub initial_gaze: [GazeState; 2],
    /// px
    pub noise_std: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn target_at(&self, t: f64) -> FaceTarget {
        FaceTarget {
            position: self.target.position(t),
            face_width: self.face_width,
        }
    }

    pub fn head_at(&self, t: f64) -> HeadPose {
        self.head.pose(t)
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_face_width(mut self, width: f64) -> Self {
        self.face_width = width;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration > 0.0) {
            return Err(ScenarioError::NonPositive("duration"));
        }
        if !(self.face_width > 0.0) {
            return Err(ScenarioError::NonPositive("face width"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(ScenarioError::NonPositive("noise std"));
        }
        Ok(())
    }

    fn base(name: &str, duration: f64, target: TargetTrajectory) -> Self {
        Self {
            name: name.to_string(),
            duration,
            target,
            face_width: FaceTarget::DEFAULT_WIDTH,
            head: HeadTrajectory::Still(HeadPose::default()),
            initial_gaze: [GazeState::default(); 2],
            noise_std: DEFAULT_NOISE_PX,
            seed: 0,
        }
    }
}

/// Static face straight ahead of the left eye's image edge. `offset_frac` is
/// the initial horizontal offset as a fraction of the half-width; the face
/// sits `distance` m in front of the head, on the robot's right.
pub fn scenario_saccade(
    offset_frac: f64,
    distance: f64,
    cam: &CameraModel,
    geom: &EyeGeometry,
) -> Result<Scenario, ScenarioError> {
    if !(offset_frac > 0.0 && offset_frac <= 1.0) {
        return Err(ScenarioError::OffsetFraction(offset_frac));
    }
    if !(distance > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(distance));
    }
    // Place the face so the left camera sees it at ex = offset_frac.
    let (cx, _) = cam.center();
    let x = -geom.half_baseline_m() + offset_frac * cx / cam.focal() * distance;
    Ok(Scenario::base(
        "saccade",
        5.0,
        TargetTrajectory::Static(Vector3::new(x, 0.0, distance)),
    ))
}

pub fn scenario_pursuit(
    freq: f64,
    amp_deg: f64,
    range: f64,
    geom: &EyeGeometry,
) -> Result<Scenario, ScenarioError> {
    if !(freq > 0.0) {
        return Err(ScenarioError::NonPositive("pursuit frequency"));
    }
    if !(range > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(range));
    }
    let limit = geom.gaze_limit_pan.min(geom.gaze_limit_tilt);
    if !(amp_deg >= 0.0 && amp_deg <= limit) {
        return Err(ScenarioError::AmplitudeTooLarge { amp_deg, limit_deg: limit });
    }
    let mut s = Scenario::base(
        "pursuit",
        15.0,
        TargetTrajectory::Orbit {
            range,
            amplitude: amp_deg.to_radians(),
            freq,
        },
    );
    s.initial_gaze = fixating(geom, range);
    Ok(s)
}

pub fn scenario_vergence(z_start: f64, z_end: f64, geom: &EyeGeometry) -> Result<Scenario, ScenarioError> {
    if !(z_end > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(z_end));
    }
    if !(z_start > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(z_start));
    }
    let over = 10.0;
    let mut s = Scenario::base(
        "vergence",
        over,
        TargetTrajectory::Approach { z_start, z_end, over },
    );
    s.initial_gaze = fixating(geom, z_start);
    Ok(s)
}

pub fn scenario_vor(freq: f64, amp_deg: f64, distance: f64, geom: &EyeGeometry) -> Result<Scenario, ScenarioError> {
    if !(freq > 0.0) {
        return Err(ScenarioError::NonPositive("head frequency"));
    }
    if !(distance > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(distance));
    }
    let mut s = Scenario::base(
        "vor",
        10.0,
        TargetTrajectory::Static(Vector3::new(0.0, 0.0, distance)),
    );
    s.head = HeadTrajectory::YawSine {
        amplitude: amp_deg.to_radians(),
        freq,
    };
    s.initial_gaze = fixating(geom, distance);
    Ok(s)
}

/// Static midline face with both eyes already fixating it.
pub fn scenario_fixation(distance: f64, geom: &EyeGeometry) -> Result<Scenario, ScenarioError> {
    if !(distance > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(distance));
    }
    let mut s = Scenario::base(
        "fixation",
        5.0,
        TargetTrajectory::Static(Vector3::new(0.0, 0.0, distance)),
    );
    s.initial_gaze = fixating(geom, distance);
    Ok(s)
}

fn fixating(geom: &EyeGeometry, distance: f64) -> [GazeState; 2] {
    let (l, r) = vergence_reference(geom, distance).unwrap_or((0.0, 0.0));
    [GazeState::new(l, 0.0), GazeState::new(r, 0.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::{normalized_error, observe_face, GroundTruthDetector, Scene};
    use approx::assert_abs_diff_eq;

    fn g() -> EyeGeometry {
        EyeGeometry::default()
    }

    #[test]
    fn saccade_starts_near_the_edge() {
        let cam = CameraModel::default();
        let s = scenario_saccade(0.9, 1.0, &cam, &g()).unwrap();
        let mut det = GroundTruthDetector::new(g(), cam, 0.0, 0);
        let scene = Scene { target: s.target_at(0.0), head: s.head_at(0.0), gaze: s.initial_gaze };
        let obs = observe_face(&mut det, &scene, 0.0);
        let (ex, ey) = normalized_error(&obs[0], &cam).unwrap();
        assert_abs_diff_eq!(ex, 0.9, epsilon = 1e-12);
        assert_eq!(ey, 0.0);
        assert_eq!(s.duration, 5.0);
    }

    #[test]
    fn saccade_rejects_bad_offset() {
        let cam = CameraModel::default();
        assert_eq!(scenario_saccade(0.0, 1.0, &cam, &g()), Err(ScenarioError::OffsetFraction(0.0)));
        assert!(scenario_saccade(1.2, 1.0, &cam, &g()).is_err());
        assert!(scenario_saccade(1.0, 1.0, &cam, &g()).is_ok());
    }

    #[test]
    fn scenarios_are_deterministic() {
        let cam = CameraModel::default();
        assert_eq!(
            scenario_saccade(0.9, 1.0, &cam, &g()).unwrap().with_seed(3),
            scenario_saccade(0.9, 1.0, &cam, &g()).unwrap().with_seed(3)
        );
    }

    #[test]
    fn pursuit_examples() {
        let s = scenario_pursuit(0.2, 15.0, 1.5, &g()).unwrap();
        assert_eq!(s.duration, 15.0);
        let p0 = s.target_at(0.0).position;
        assert_abs_diff_eq!(p0, Vector3::new(0.0, 0.0, 1.5), epsilon = 1e-15);
        // quarter period of 5 s
        let p = s.target_at(1.25).position;
        assert_abs_diff_eq!(p.x.atan2(p.z).to_degrees(), 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!((p.y / 1.5).asin().to_degrees(), 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.target_at(5.0).position, p0, epsilon = 1e-12);
        assert!(matches!(
            scenario_pursuit(0.2, 31.0, 1.5, &g()),
            Err(ScenarioError::AmplitudeTooLarge { .. })
        ));
    }

    #[test]
    fn vergence_examples() {
        let s = scenario_vergence(2.0, 0.3, &g()).unwrap();
        assert_eq!(s.target_at(0.0).position.z, 2.0);
        assert_abs_diff_eq!(s.target_at(10.0).position.z, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.target_at(5.0).position.z, 1.15, epsilon = 1e-15);
        assert!(scenario_vergence(2.0, 0.0, &g()).is_err());
        assert!(scenario_vergence(2.0, -0.1, &g()).is_err());
    }

    #[test]
    fn vor_examples() {
        let s = scenario_vor(0.5, 10.0, 1.5, &g()).unwrap();
        assert_eq!(s.head_at(0.0).yaw, 0.0);
        assert_abs_diff_eq!(s.head_at(0.5).yaw.to_degrees(), 10.0, epsilon = 1e-12);
        // peak rate 2*pi*f*A, by finite difference around t = 0
        let h = 1e-6;
        let rate = (s.head_at(h).yaw - s.head_at(-h).yaw) / (2.0 * h);
        assert_abs_diff_eq!(rate.to_degrees(), 31.415_926_535_897_93, epsilon = 1e-6);
    }

    #[test]
    fn trajectories_are_total() {
        let cam = CameraModel::default();
        let all = [
            scenario_saccade(0.9, 1.0, &cam, &g()).unwrap(),
            scenario_pursuit(0.2, 15.0, 1.5, &g()).unwrap(),
            scenario_vergence(2.0, 0.3, &g()).unwrap(),
            scenario_vor(0.5, 10.0, 1.5, &g()).unwrap(),
            scenario_fixation(1.5, &g()).unwrap(),
        ];
        for s in &all {
            let n = (s.duration * 100.0).round() as usize;
            for k in 0..=n {
                let t = k as f64 / 100.0;
                let p = s.target_at(t).position;
                let h = s.head_at(t);
                assert!(p.iter().all(|c| c.is_finite()) && h.yaw.is_finite() && h.pitch.is_finite());
            }
        }
    }
}
