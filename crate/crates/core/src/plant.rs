//! Tendon-driven eyeball model.
//!
//! Each eye is rotated by two cords, one per agonist-antagonist pair. A cord
//! wraps the sphere, so rotating the eye by `θ` about an axis perpendicular to
//! the cord plane changes the cord length by `R·θ` on the agonist side and by
//! `-R·θ` on the antagonist side. Both ends of a cord are wound on one servo
//! bobbin of radius `r_b`, which turns by `R·θ / r_b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("gaze out of range: {axis} = {value_deg:.3} deg exceeds limit {limit_deg:.3} deg")]
    GazeOutOfRange {
        axis: &'static str,
        value_deg: f64,
        limit_deg: f64,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("invalid servo model: {0}")]
    InvalidServoModel(&'static str),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// Fixed geometric constants of one eye and of the binocular head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EyeGeometry {
    /// mm
    pub eyeball_radius: f64,
    /// Cord attachment angle measured from the optical axis, deg. Stored for
    /// routing models that need it; the constant-moment-arm mapping ignores it.
    pub attachment_angle: f64,
    /// mm
    pub bobbin_radius: f64,
    /// deg
    pub gaze_limit_pan: f64,
    /// deg
    pub gaze_limit_tilt: f64,
    /// mm, centre to centre
    pub interocular_distance: f64,
}

impl Default for EyeGeometry {
    fn default() -> Self {
        Self {
            eyeball_radius: 30.0,
            attachment_angle: 55.0,
            bobbin_radius: 8.0,
            gaze_limit_pan: 30.0,
            gaze_limit_tilt: 30.0,
            interocular_distance: 70.0,
        }
    }
}

impl EyeGeometry {
    pub fn validate(&self) -> Result<(), PlantError> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.eyeball_radius)
            || !finite_pos(self.bobbin_radius)
            || !finite_pos(self.interocular_distance)
        {
            return Err(PlantError::InvalidGeometry("lengths must be positive"));
        }
        if !(self.attachment_angle > 0.0 && self.attachment_angle < 90.0) {
            return Err(PlantError::InvalidGeometry(
                "attachment angle must lie in (0, 90) deg",
            ));
        }
        if !finite_pos(self.gaze_limit_pan) || !finite_pos(self.gaze_limit_tilt) {
            return Err(PlantError::InvalidGeometry("gaze limits must be positive"));
        }
        if self.bobbin_radius >= self.eyeball_radius {
            return Err(PlantError::InvalidGeometry(
                "bobbin radius must be smaller than eyeball radius",
            ));
        }
        Ok(())
    }

    /// Servo degrees per degree of gaze.
    pub fn transmission_ratio(&self) -> f64 {
        self.eyeball_radius / self.bobbin_radius
    }

    /// Half the baseline, in metres.
    pub fn half_baseline_m(&self) -> f64 {
        self.interocular_distance * 1e-3 / 2.0
    }
}

/// Eye orientation relative to the head. Positive pan turns the eye to the
/// robot's left, positive tilt turns it up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeState {
    /// rad
    pub pan: f64,
    /// rad
    pub tilt: f64,
}

impl GazeState {
    pub fn new(pan: f64, tilt: f64) -> Self {
        Self { pan, tilt }
    }

    pub fn from_degrees(pan_deg: f64, tilt_deg: f64) -> Self {
        Self::new(pan_deg.to_radians(), tilt_deg.to_radians())
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.pan * k, self.tilt * k)
    }
}

impl std::ops::Neg for GazeState {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.pan, -self.tilt)
    }
}

/// Signed cord excursion per axis, mm. Positive means the agonist side
/// shortens; the antagonist side lengthens by the same amount.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TendonExcursion {
    pub horizontal: f64,
    pub vertical: f64,
}

impl TendonExcursion {
    pub fn antagonist(&self) -> Self {
        Self {
            horizontal: -self.horizontal,
            vertical: -self.vertical,
        }
    }
}

fn check_range(geom: &EyeGeometry, gaze: GazeState) -> Result<(), PlantError> {
    // A hair of slack so values produced by clamp_gaze always pass.
    const SLACK: f64 = 1e-12;
    let pan_limit = geom.gaze_limit_pan.to_radians();
    let tilt_limit = geom.gaze_limit_tilt.to_radians();
    if !(gaze.pan.abs() <= pan_limit + SLACK) {
        return Err(PlantError::GazeOutOfRange {
            axis: "pan",
            value_deg: gaze.pan.to_degrees(),
            limit_deg: geom.gaze_limit_pan,
        });
    }
    if !(gaze.tilt.abs() <= tilt_limit + SLACK) {
        return Err(PlantError::GazeOutOfRange {
            axis: "tilt",
            value_deg: gaze.tilt.to_degrees(),
            limit_deg: geom.gaze_limit_tilt,
        });
    }
    Ok(())
}

pub fn tendon_excursion(
    geom: &EyeGeometry,
    gaze: GazeState,
) -> Result<TendonExcursion, PlantError> {
    check_range(geom, gaze)?;
    Ok(TendonExcursion {
        horizontal: geom.eyeball_radius * gaze.pan,
        vertical: geom.eyeball_radius * gaze.tilt,
    })
}

/// Servo horn angles (deg, relative to the neutral horn position) that
/// realise `gaze`. Returns `(horizontal, vertical)`.
pub fn gaze_to_servo(geom: &EyeGeometry, gaze: GazeState) -> Result<(f64, f64), PlantError> {
    let exc = tendon_excursion(geom, gaze)?;
    Ok((
        (exc.horizontal / geom.bobbin_radius).to_degrees(),
        (exc.vertical / geom.bobbin_radius).to_degrees(),
    ))
}

/// Inverse of [`gaze_to_servo`]. Out-of-range results are clamped; the flag
/// reports whether that happened.
pub fn servo_to_gaze(geom: &EyeGeometry, servo_h: f64, servo_v: f64) -> (GazeState, bool) {
    let gaze = GazeState::new(
        servo_h.to_radians() * geom.bobbin_radius / geom.eyeball_radius,
        servo_v.to_radians() * geom.bobbin_radius / geom.eyeball_radius,
    );
    clamp_gaze(geom, gaze)
}

pub fn clamp_gaze(geom: &EyeGeometry, gaze: GazeState) -> (GazeState, bool) {
    let pan_limit = geom.gaze_limit_pan.to_radians();
    let tilt_limit = geom.gaze_limit_tilt.to_radians();
    let pan = gaze.pan.clamp(-pan_limit, pan_limit);
    let tilt = gaze.tilt.clamp(-tilt_limit, tilt_limit);
    let clamped = pan != gaze.pan || tilt != gaze.tilt;
    (GazeState::new(pan, tilt), clamped)
}

/// First-order lag plus slew limit standing in for the servo's position loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoModel {
    /// deg/s
    pub max_speed: f64,
    /// s
    pub time_constant: f64,
}

impl Default for ServoModel {
    fn default() -> Self {
        Self {
            max_speed: 684.0,
            time_constant: 0.020,
        }
    }
}

impl ServoModel {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.max_speed.is_finite() && self.max_speed > 0.0) {
            return Err(PlantError::InvalidServoModel("max_speed must be positive"));
        }
        if !(self.time_constant.is_finite() && self.time_constant > 0.0) {
            return Err(PlantError::InvalidServoModel(
                "time_constant must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ServoState {
    /// deg
    pub position: f64,
    /// deg
    pub goal: f64,
}

impl ServoState {
    pub fn at(position: f64) -> Self {
        Self {
            position,
            goal: position,
        }
    }
}

pub fn step_servo(model: &ServoModel, state: ServoState, dt: f64) -> Result<ServoState, PlantError> {
    if !(dt > 0.0) {
        return Err(PlantError::NonPositiveStep(dt));
    }
    let alpha = 1.0 - (-dt / model.time_constant).exp();
    let cap = model.max_speed * dt;
    let delta = ((state.goal - state.position) * alpha).clamp(-cap, cap);
    Ok(ServoState {
        position: state.position + delta,
        goal: state.goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geom() -> EyeGeometry {
        EyeGeometry::default()
    }

    #[test]
    fn excursion_examples() {
        let g = geom();
        let zero = tendon_excursion(&g, GazeState::default()).unwrap();
        assert_eq!(zero, TendonExcursion::default());
        let e = tendon_excursion(&g, GazeState::from_degrees(10.0, 0.0)).unwrap();
        assert_abs_diff_eq!(e.horizontal, 5.235_987_755_982_989, epsilon = 1e-12);
        let e = tendon_excursion(&g, GazeState::from_degrees(-10.0, 0.0)).unwrap();
        assert_abs_diff_eq!(e.horizontal, -5.235_987_755_982_989, epsilon = 1e-12);
        assert_eq!(e.antagonist().horizontal, -e.horizontal);
    }

    #[test]
    fn excursion_rejects_out_of_range() {
        let err = tendon_excursion(&geom(), GazeState::from_degrees(31.0, 0.0)).unwrap_err();
        assert!(matches!(err, PlantError::GazeOutOfRange { axis: "pan", .. }));
        let err = gaze_to_servo(&geom(), GazeState::from_degrees(0.0, -40.0)).unwrap_err();
        assert!(matches!(err, PlantError::GazeOutOfRange { axis: "tilt", .. }));
        assert!(tendon_excursion(&geom(), GazeState::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn servo_mapping_examples() {
        let g = geom();
        assert_eq!(g.transmission_ratio(), 3.75);
        assert_eq!(gaze_to_servo(&g, GazeState::default()).unwrap(), (0.0, 0.0));
        let (h, _) = gaze_to_servo(&g, GazeState::from_degrees(10.0, 0.0)).unwrap();
        assert_abs_diff_eq!(h, 37.5, epsilon = 1e-12);
        let (_, v) = gaze_to_servo(&g, GazeState::from_degrees(0.0, -4.0)).unwrap();
        assert_abs_diff_eq!(v, -15.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_mapping_examples() {
        let g = geom();
        let (z, clamped) = servo_to_gaze(&g, 0.0, 0.0);
        assert_eq!(z, GazeState::default());
        assert!(!clamped);
        let (p, _) = servo_to_gaze(&g, 37.5, 0.0);
        assert_abs_diff_eq!(p.pan.to_degrees(), 10.0, epsilon = 1e-12);
        let (c, clamped) = servo_to_gaze(&g, 200.0, 0.0);
        assert!(clamped);
        assert_abs_diff_eq!(c.pan.to_degrees(), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn clamp_examples() {
        let g = geom();
        let (s, f) = clamp_gaze(&g, GazeState::from_degrees(10.0, 0.0));
        assert!(!f);
        assert_abs_diff_eq!(s.pan.to_degrees(), 10.0, epsilon = 1e-12);
        let (s, f) = clamp_gaze(&g, GazeState::from_degrees(45.0, 0.0));
        assert!(f);
        assert_abs_diff_eq!(s.pan.to_degrees(), 30.0, epsilon = 1e-12);
        let (s, f) = clamp_gaze(&g, GazeState::from_degrees(-45.0, 0.0));
        assert!(f);
        assert_abs_diff_eq!(s.pan.to_degrees(), -30.0, epsilon = 1e-12);
        // clamped values are accepted by the forward mapping
        assert!(gaze_to_servo(&g, s).is_ok());
    }

    #[test]
    fn step_servo_examples() {
        let m = ServoModel::default();
        let s = step_servo(&m, ServoState::at(50.0), 0.01).unwrap();
        assert_eq!(s.position, 50.0);

        let s = step_servo(&m, ServoState { position: 0.0, goal: 100.0 }, 0.010).unwrap();
        assert_abs_diff_eq!(s.position, 6.84, epsilon = 1e-12);

        let s = step_servo(&m, ServoState { position: 0.0, goal: 1.0 }, 0.010).unwrap();
        assert_abs_diff_eq!(s.position, 0.393_469_340_287_366_6, epsilon = 1e-12);
    }

    #[test]
    fn step_servo_rejects_bad_dt() {
        let m = ServoModel::default();
        assert_eq!(
            step_servo(&m, ServoState::at(0.0), 0.0),
            Err(PlantError::NonPositiveStep(0.0))
        );
        assert!(step_servo(&m, ServoState::at(0.0), -1.0).is_err());
    }

    #[test]
    fn step_servo_converges_monotonically() {
        let m = ServoModel::default();
        let mut s = ServoState { position: -80.0, goal: 95.0 };
        let mut last = (s.goal - s.position).abs();
        let mut steps = 0;
        while last >= 1e-6 {
            s = step_servo(&m, s, 0.01).unwrap();
            let gap = (s.goal - s.position).abs();
            assert!(gap < last);
            last = gap;
            steps += 1;
            assert!(steps < 10_000);
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(geom().validate().is_ok());
        let bad = EyeGeometry { bobbin_radius: 40.0, ..geom() };
        assert!(bad.validate().is_err());
        let bad = EyeGeometry { attachment_angle: 90.0, ..geom() };
        assert!(bad.validate().is_err());
        let bad = EyeGeometry { gaze_limit_tilt: 0.0, ..geom() };
        assert!(bad.validate().is_err());
        assert!(ServoModel { max_speed: 0.0, ..Default::default() }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn in_range() -> impl Strategy<Value = GazeState> {
            let lim = 30f64.to_radians();
            (-lim..=lim, -lim..=lim).prop_map(|(p, t)| GazeState::new(p, t))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn inverse_pair(g in in_range()) {
                let geom = EyeGeometry::default();
                let (h, v) = gaze_to_servo(&geom, g).unwrap();
                let (back, _) = servo_to_gaze(&geom, h, v);
                prop_assert!((back.pan - g.pan).abs() < 1e-9);
                prop_assert!((back.tilt - g.tilt).abs() < 1e-9);
            }

            #[test]
            fn linear_in_gaze(g in in_range(), k in -1.0f64..=1.0) {
                let geom = EyeGeometry::default();
                let (h, v) = gaze_to_servo(&geom, g).unwrap();
                let (hk, vk) = gaze_to_servo(&geom, g.scale(k)).unwrap();
                prop_assert!((hk - k * h).abs() < 1e-9);
                prop_assert!((vk - k * v).abs() < 1e-9);
            }

            #[test]
            fn agonist_antagonist_antisymmetry(g in in_range()) {
                let geom = EyeGeometry::default();
                let a = tendon_excursion(&geom, g).unwrap();
                let b = tendon_excursion(&geom, -g).unwrap();
                prop_assert_eq!(a.horizontal, -b.horizontal);
                prop_assert_eq!(a.vertical, -b.vertical);
            }

            #[test]
            fn step_respects_rate_limit(pos in -150.0f64..150.0, goal in -150.0f64..150.0, dt in 1e-4f64..0.1) {
                let m = ServoModel::default();
                let s = step_servo(&m, ServoState { position: pos, goal }, dt).unwrap();
                prop_assert!((s.position - pos).abs() <= m.max_speed * dt * (1.0 + 1e-12));
            }
        }
    }
}
