//! Pinhole camera per eye and synthetic face observations.
//!
//! Frames: robot body has x right, y up, z forward. A camera looks along its
//! own +z with +x right and +y up; image v grows downward.

use nalgebra::{Rotation3, Vector3};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::plant::{EyeGeometry, GazeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Eye {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Eye {
    pub const BOTH: [Eye; 2] = [Eye::Left, Eye::Right];

    pub fn index(self) -> usize {
        match self {
            Eye::Left => 0,
            Eye::Right => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Eye::Left => "L",
            Eye::Right => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    /// deg
    pub horizontal_fov: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            horizontal_fov: 60.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.width == 0 || self.height == 0 {
            return Err("camera resolution must be positive");
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < 180.0) {
            return Err("horizontal fov must lie in (0, 180) deg");
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.horizontal_fov.to_radians() / 2.0).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
    }
}

/// Body orientation in the world. Positive yaw turns the head left, positive
/// pitch turns it up (same sense as gaze pan/tilt).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadPose {
    /// rad
    pub yaw: f64,
    /// rad
    pub pitch: f64,
}

impl HeadPose {
    pub fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw, pitch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceTarget {
    /// m, world frame (coincides with the body frame at zero head pose)
    pub position: Vector3<f64>,
    /// m
    pub face_width: f64,
}

impl FaceTarget {
    pub const DEFAULT_WIDTH: f64 = 0.16;

    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            face_width: Self::DEFAULT_WIDTH,
        }
    }
}

/// Rotation for a left-positive yaw followed by an up-positive pitch.
pub fn yaw_pitch(yaw: f64, pitch: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), -yaw)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch)
}

/// Camera pose in the world: maps camera coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl CameraPose {
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (world - self.position)
    }
}

pub fn eye_camera_pose(geom: &EyeGeometry, head: HeadPose, eye: Eye, gaze: GazeState) -> CameraPose {
    let half = geom.half_baseline_m();
    let x = match eye {
        Eye::Left => -half,
        Eye::Right => half,
    };
    let head_rot = yaw_pitch(head.yaw, head.pitch);
    CameraPose {
        position: head_rot * Vector3::new(x, 0.0, 0.0),
        rotation: head_rot * yaw_pitch(gaze.pan, gaze.tilt),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64, depth: f64 },
    BehindCamera,
}

pub fn project(cam: &CameraModel, pose: &CameraPose, point: &Vector3<f64>) -> Projection {
    let p = pose.to_camera(point);
    if p.z <= 0.0 {
        return Projection::BehindCamera;
    }
    let f = cam.focal();
    let (cx, cy) = cam.center();
    Projection::Pixel {
        u: cx + f * p.x / p.z,
        v: cy - f * p.y / p.z,
        depth: p.z,
    }
}

/// Unit ray in world coordinates through pixel `(u, v)`.
pub fn back_project(cam: &CameraModel, pose: &CameraPose, u: f64, v: f64) -> Vector3<f64> {
    let f = cam.focal();
    let (cx, cy) = cam.center();
    let dir = Vector3::new((u - cx) / f, (cy - v) / f, 1.0);
    (pose.rotation * dir).normalize()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceObservation {
    pub camera: Eye,
    /// Face centre, px. NaN when the face is behind the camera.
    pub u: f64,
    pub v: f64,
    /// `(u0, v0, w, h)`, px
    pub bbox: (f64, f64, f64, f64),
    /// s
    pub timestamp: f64,
    pub valid: bool,
}

impl FaceObservation {
    pub fn lost(camera: Eye, timestamp: f64) -> Self {
        Self {
            camera,
            u: f64::NAN,
            v: f64::NAN,
            bbox: (f64::NAN, f64::NAN, 0.0, 0.0),
            timestamp,
            valid: false,
        }
    }
}

/// Everything a synthetic detector needs to know about the world at one
/// instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub target: FaceTarget,
    pub head: HeadPose,
    /// Indexed by [`Eye::index`].
    pub gaze: [GazeState; 2],
}

/// Default detector pixel noise, px.
pub const DEFAULT_NOISE_PX: f64 = 1.0;

/// Source of per-camera face detections.
pub trait FaceSource {
    fn next_observation(&mut self, eye: Eye, time: f64, scene: &Scene) -> FaceObservation;
}

/// Deterministic stand-in for a face detector: projects the true face
/// position and adds seeded Gaussian pixel noise.
#[derive(Debug, Clone)]
pub struct GroundTruthDetector {
    geom: EyeGeometry,
    cam: CameraModel,
    noise_std: f64,
    rng: SplitMix64,
    last_time: [f64; 2],
}

impl GroundTruthDetector {
    pub fn new(geom: EyeGeometry, cam: CameraModel, noise_std: f64, seed: u64) -> Self {
        Self {
            geom,
            cam,
            noise_std: noise_std.max(0.0),
            rng: SplitMix64::seed_from_u64(seed),
            last_time: [f64::NEG_INFINITY; 2],
        }
    }

    fn noise(&mut self) -> f64 {
        if self.noise_std == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        z * self.noise_std
    }
}

impl FaceSource for GroundTruthDetector {
    fn next_observation(&mut self, eye: Eye, time: f64, scene: &Scene) -> FaceObservation {
        let slot = &mut self.last_time[eye.index()];
        let time = time.max(*slot);
        *slot = time;
        let pose = eye_camera_pose(&self.geom, scene.head, eye, scene.gaze[eye.index()]);
        let (du, dv) = (self.noise(), self.noise());
        observe_with(&self.cam, &pose, &scene.target, eye, time, du, dv)
    }
}

fn observe_with(
    cam: &CameraModel,
    pose: &CameraPose,
    target: &FaceTarget,
    eye: Eye,
    time: f64,
    du: f64,
    dv: f64,
) -> FaceObservation {
    match project(cam, pose, &target.position) {
        Projection::BehindCamera => FaceObservation::lost(eye, time),
        Projection::Pixel { u, v, depth } => {
            let (u, v) = (u + du, v + dv);
            let w = cam.focal() * target.face_width / depth;
            FaceObservation {
                camera: eye,
                u,
                v,
                bbox: (u - w / 2.0, v - w / 2.0, w, w),
                timestamp: time,
                valid: cam.contains(u, v),
            }
        }
    }
}

/// Single-shot observation of both eyes. Noise is drawn from `detector`'s
/// stream; with zero noise the result depends only on the arguments.
pub fn observe_face(
    detector: &mut GroundTruthDetector,
    scene: &Scene,
    time: f64,
) -> [FaceObservation; 2] {
    Eye::BOTH.map(|eye| detector.next_observation(eye, time, scene))
}

/// Image error normalised to `[-1, 1]` per axis, or `None` when there is no
/// measurement.
pub fn normalized_error(obs: &FaceObservation, cam: &CameraModel) -> Option<(f64, f64)> {
    if !obs.valid {
        return None;
    }
    let (cx, cy) = cam.center();
    Some(((obs.u - cx) / cx, (obs.v - cy) / cy))
}
