//! Visual servo: per-axis PID on normalised image error, a movement-mode
//! supervisor and vestibulo-ocular feedforward.
//!
//! Commands are gaze *rates* (rad/s). Image error is positive when the face
//! sits right of / below the image centre, which calls for a negative pan /
//! tilt rate, so the visual term is the negated PID output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::EyeGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on `ki * integral`, rad/s.
    pub integral_limit: f64,
    /// Bound on the output, rad/s.
    pub output_limit: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        if [self.kp, self.ki, self.kd].iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(ControlError::InvalidConfig("gains must be non-negative"));
        }
        if !(self.integral_limit > 0.0 && self.output_limit > 0.0) {
            return Err(ControlError::InvalidConfig("pid limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

impl PidState {
    /// Keep the integral, forget the derivative history.
    pub fn frozen(self) -> Self {
        Self { initialized: false, ..self }
    }
}

pub fn pid_step(
    gains: &PidGains,
    state: PidState,
    error: f64,
    dt: f64,
) -> Result<(f64, PidState), ControlError> {
    if !(dt > 0.0) {
        return Err(ControlError::NonPositiveStep(dt));
    }
    let mut integral = state.integral + error * dt;
    if gains.ki > 0.0 {
        let bound = gains.integral_limit / gains.ki;
        integral = integral.clamp(-bound, bound);
    }
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        0.0
    };
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let u = u.clamp(-gains.output_limit, gains.output_limit);
    Ok((
        u,
        PidState {
            integral,
            prev_error: error,
            initialized: true,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseMode {
    Saccade,
    SmoothPursuit,
    Fixation,
}

impl BaseMode {
    pub fn label(self) -> &'static str {
        match self {
            BaseMode::Saccade => "saccade",
            BaseMode::SmoothPursuit => "pursuit",
            BaseMode::Fixation => "fixation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovementMode {
    pub base: BaseMode,
    pub vor_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorConfig {
    /// ‖e‖∞ above which a saccade is issued.
    pub saccade_threshold: f64,
    /// ‖e‖∞ below which the eye is considered fixating.
    pub fixation_threshold: f64,
    /// rad/s
    pub vor_rate_threshold: f64,
    pub vor_gain: f64,
    /// Turns the vestibular feedforward off entirely.
    pub vor_enabled: bool,
    /// Rate cap during saccades, rad/s.
    pub saccade_rate: f64,
    /// Errors below this magnitude (per axis) produce no visual correction.
    /// Sized to the gaze resolution of the servo so a fixated eye does not
    /// hunt between adjacent position units.
    pub deadband: f64,
    pub pursuit: PidGains,
    pub saccade: PidGains,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            saccade_threshold: 0.30,
            fixation_threshold: 0.03,
            vor_rate_threshold: 0.05,
            vor_gain: 1.0,
            vor_enabled: true,
            saccade_rate: 6.0,
            deadband: 0.0025,
            pursuit: PidGains {
                kp: 4.0,
                ki: 1.0,
                kd: 0.05,
                integral_limit: 1.0,
                output_limit: 3.0,
            },
            saccade: PidGains {
                kp: 6.0,
                ki: 0.0,
                kd: 0.0,
                integral_limit: 1.0,
                output_limit: 6.0,
            },
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.fixation_threshold >= 0.0 && self.fixation_threshold < self.saccade_threshold) {
            return Err(ControlError::InvalidConfig(
                "fixation_threshold must be below saccade_threshold",
            ));
        }
        if !(self.saccade_rate > 0.0 && self.vor_rate_threshold >= 0.0) {
            return Err(ControlError::InvalidConfig("rates must be positive"));
        }
        if !(self.deadband >= 0.0 && self.vor_gain.is_finite()) {
            return Err(ControlError::InvalidConfig("deadband and vor_gain must be finite"));
        }
        self.pursuit.validate()?;
        self.saccade.validate()
    }

    /// Gains in force for `mode`. Saccades are additionally capped at
    /// `saccade_rate`.
    pub fn gains_for(&self, mode: BaseMode) -> PidGains {
        match mode {
            BaseMode::Saccade => PidGains {
                output_limit: self.saccade.output_limit.min(self.saccade_rate),
                ..self.saccade
            },
            BaseMode::SmoothPursuit | BaseMode::Fixation => self.pursuit,
        }
    }
}

pub fn classify_mode(error: (f64, f64), head_rate: f64, cfg: &SupervisorConfig) -> MovementMode {
    let mag = error.0.abs().max(error.1.abs());
    let base = if mag > cfg.saccade_threshold {
        BaseMode::Saccade
    } else if mag < cfg.fixation_threshold {
        BaseMode::Fixation
    } else {
        BaseMode::SmoothPursuit
    };
    MovementMode {
        base,
        vor_active: cfg.vor_enabled && head_rate.abs() > cfg.vor_rate_threshold,
    }
}

/// Pan/tilt rate pair, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeRate {
    pub pan: f64,
    pub tilt: f64,
}

/// Head angular velocity, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadRate {
    pub yaw: f64,
    pub pitch: f64,
}

impl HeadRate {
    pub fn magnitude(&self) -> f64 {
        self.yaw.abs().max(self.pitch.abs())
    }
}

/// PID memory of one eye, `[pan, tilt]`.
pub type EyePid = [PidState; 2];

/// Rate command for one eye. `error` is `None` when the face was not
/// detected: the visual term is then zero and the integrators are frozen,
/// while the vestibular term still applies.
pub fn gaze_command(
    cfg: &SupervisorConfig,
    mode: MovementMode,
    error: Option<(f64, f64)>,
    head_rate: HeadRate,
    dt: f64,
    pid: &mut EyePid,
) -> Result<GazeRate, ControlError> {
    if !(dt > 0.0) {
        return Err(ControlError::NonPositiveStep(dt));
    }
    let mut rate = GazeRate::default();
    match error {
        Some((ex, ey)) => {
            let gains = cfg.gains_for(mode.base);
            // Inside the deadband an axis holds still: no output, integral kept.
            let axis = |e: f64, st: PidState| {
                if e.abs() < cfg.deadband {
                    Ok((0.0, st.frozen()))
                } else {
                    pid_step(&gains, st, e, dt)
                }
            };
            let (u_pan, s_pan) = axis(ex, pid[0])?;
            let (u_tilt, s_tilt) = axis(ey, pid[1])?;
            *pid = [s_pan, s_tilt];
            rate.pan = 0.0 - u_pan;
            rate.tilt = 0.0 - u_tilt;
        }
        None => {
            *pid = [pid[0].frozen(), pid[1].frozen()];
        }
    }
    if mode.vor_active {
        rate.pan -= cfg.vor_gain * head_rate.yaw;
        rate.tilt -= cfg.vor_gain * head_rate.pitch;
    }
    Ok(rate)
}

/// Binocular controller: classifies each eye, keeps PID memory and resets
/// it whenever an eye switches between saccadic and pursuit gains.
#[derive(Debug, Clone)]
pub struct GazeController {
    cfg: SupervisorConfig,
    pid: [EyePid; 2],
    last: [Option<BaseMode>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeCommand {
    pub rate: GazeRate,
    pub mode: MovementMode,
}

impl GazeController {
    pub fn new(cfg: SupervisorConfig) -> Self {
        Self {
            cfg,
            pid: [[PidState::default(); 2]; 2],
            last: [None; 2],
        }
    }

    pub fn config(&self) -> &SupervisorConfig {
        &self.cfg
    }

    /// Replaces the configuration; PID memory is kept.
    pub fn set_config(&mut self, cfg: SupervisorConfig) {
        self.cfg = cfg;
    }

    pub fn reset(&mut self) {
        self.pid = [[PidState::default(); 2]; 2];
        self.last = [None; 2];
    }

    pub fn pid_state(&self, eye: usize) -> EyePid {
        self.pid[eye]
    }

    /// `errors` indexed by eye; `None` for a lost face.
    pub fn step(
        &mut self,
        errors: [Option<(f64, f64)>; 2],
        head_rate: HeadRate,
        dt: f64,
    ) -> Result<[EyeCommand; 2], ControlError> {
        let mut out = [EyeCommand {
            rate: GazeRate::default(),
            mode: MovementMode { base: BaseMode::Fixation, vor_active: false },
        }; 2];
        for (i, err) in errors.iter().enumerate() {
            let mode = match err {
                Some(e) => classify_mode(*e, head_rate.magnitude(), &self.cfg),
                None => MovementMode {
                    base: self.last[i].unwrap_or(BaseMode::Fixation),
                    vor_active: classify_mode((0.0, 0.0), head_rate.magnitude(), &self.cfg)
                        .vor_active,
                },
            };
            let was_saccade = self.last[i].map(|m| m == BaseMode::Saccade);
            let is_saccade = mode.base == BaseMode::Saccade;
            if was_saccade.is_some_and(|w| w != is_saccade) {
                self.pid[i] = [PidState::default(); 2];
            }
            self.last[i] = Some(mode.base);
            let rate = gaze_command(&self.cfg, mode, *err, head_rate, dt, &mut self.pid[i])?;
            out[i] = EyeCommand { rate, mode };
        }
        Ok(out)
    }
}

/// Pan angles `(left, right)` that fixate a midline point at `distance` m.
/// The left eye turns right (negative pan), the right eye turns left.
pub fn vergence_reference(geom: &EyeGeometry, distance: f64) -> Result<(f64, f64), ControlError> {
    if !(distance > 0.0) {
        return Err(ControlError::NonPositiveDistance(distance));
    }
    let a = (geom.half_baseline_m() / distance).atan();
    Ok((-a, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains { kp, ki, kd, integral_limit: 10.0, output_limit: 10.0 }
    }

    #[test]
    fn pid_examples() {
        let (u, _) = pid_step(&gains(1.0, 0.0, 0.0), PidState::default(), 0.5, 0.1).unwrap();
        assert_eq!(u, 0.5);

        let (u, s) = pid_step(&gains(1.0, 2.0, 0.0), PidState::default(), 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(s.integral, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(u, 0.6, epsilon = 1e-15);

        let g = gains(0.0, 0.0, 0.2);
        let (u0, s) = pid_step(&g, PidState::default(), 0.0, 0.1).unwrap();
        assert_eq!(u0, 0.0);
        let (u1, _) = pid_step(&g, s, 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(u1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn first_step_has_no_derivative_kick() {
        let (u, _) = pid_step(&gains(0.0, 0.0, 1.0), PidState::default(), 0.9, 0.01).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn pid_rejects_bad_dt() {
        assert_eq!(
            pid_step(&gains(1.0, 0.0, 0.0), PidState::default(), 0.1, 0.0),
            Err(ControlError::NonPositiveStep(0.0))
        );
    }

    #[test]
    fn classify_examples() {
        let cfg = SupervisorConfig::default();
        assert_eq!(classify_mode((0.5, 0.0), 0.0, &cfg).base, BaseMode::Saccade);
        assert_eq!(classify_mode((0.1, 0.0), 0.0, &cfg).base, BaseMode::SmoothPursuit);
        let m = classify_mode((0.01, 0.0), 0.5, &cfg);
        assert_eq!(m, MovementMode { base: BaseMode::Fixation, vor_active: true });
        assert!(!classify_mode((0.0, 0.0), 0.5, &SupervisorConfig { vor_enabled: false, ..cfg }).vor_active);
    }

    #[test]
    fn gaze_command_examples() {
        let cfg = SupervisorConfig::default();
        let yaw = 20f64.to_radians();
        let head = HeadRate { yaw, pitch: 0.0 };
        let mut ctl = GazeController::new(cfg);
        let cmds = ctl.step([Some((0.0, 0.0)); 2], head, 0.01).unwrap();
        for c in cmds {
            assert_eq!(c.rate.pan, -yaw);
            assert_eq!(c.rate.tilt, 0.0);
        }

        let cmds = GazeController::new(cfg).step([Some((0.0, 0.0)); 2], HeadRate::default(), 0.01).unwrap();
        assert!(cmds.iter().all(|c| c.rate == GazeRate::default()));

        let mut pid = [PidState::default(); 2];
        let mode = MovementMode { base: BaseMode::Saccade, vor_active: false };
        let r = gaze_command(&cfg, mode, Some((1.0, -1.0)), HeadRate::default(), 0.01, &mut pid).unwrap();
        assert_eq!(r.pan, -6.0);
        assert_eq!(r.tilt, 6.0);
    }

    #[test]
    fn lost_face_freezes_integral_but_keeps_vor() {
        let cfg = SupervisorConfig::default();
        let mut pid = [PidState { integral: 0.3, prev_error: 0.1, initialized: true }; 2];
        let mode = MovementMode { base: BaseMode::SmoothPursuit, vor_active: true };
        let head = HeadRate { yaw: 0.4, pitch: -0.2 };
        let r = gaze_command(&cfg, mode, None, head, 0.01, &mut pid).unwrap();
        assert_eq!(r, GazeRate { pan: -0.4, tilt: 0.2 });
        assert_eq!(pid[0].integral, 0.3);
        assert!(!pid[0].initialized);
    }

    #[test]
    fn deadband_suppresses_tiny_errors() {
        let cfg = SupervisorConfig::default();
        let cmds = GazeController::new(cfg)
            .step([Some((0.001, -0.002)); 2], HeadRate::default(), 0.01)
            .unwrap();
        assert!(cmds.iter().all(|c| c.rate == GazeRate::default()));
    }

    #[test]
    fn saccade_transition_resets_memory() {
        let mut ctl = GazeController::new(SupervisorConfig::default());
        for _ in 0..50 {
            ctl.step([Some((0.2, 0.0)); 2], HeadRate::default(), 0.01).unwrap();
        }
        assert!(ctl.pid_state(0)[0].integral > 0.0);
        let cmds = ctl.step([Some((0.8, 0.0)); 2], HeadRate::default(), 0.01).unwrap();
        assert_eq!(cmds[0].mode.base, BaseMode::Saccade);
        assert_eq!(ctl.pid_state(0)[0].integral, 0.8 * 0.01);
    }

    #[test]
    fn vergence_examples() {
        let g = EyeGeometry::default();
        assert_eq!(vergence_reference(&g, f64::INFINITY).unwrap(), (-0.0, 0.0));
        let (l, r) = vergence_reference(&g, 0.5).unwrap();
        assert_abs_diff_eq!(r.to_degrees(), 4.004_172_940_709_388, epsilon = 1e-9);
        assert_eq!(l, -r);
        let (_, r) = vergence_reference(&g, 0.3).unwrap();
        assert_abs_diff_eq!(r.to_degrees(), 6.654_425_046_006_597, epsilon = 1e-9);
        assert!(vergence_reference(&g, 0.0).is_err());
        assert!(vergence_reference(&g, -1.0).is_err());
    }

    #[test]
    fn p_only_loop_settles_on_zero_error() {
        // plant: pure integrator of the commanded rate, error = target - gaze
        let g = PidGains { kp: 3.0, ki: 0.0, kd: 0.0, integral_limit: 1.0, output_limit: 5.0 };
        let target = 0.4;
        let mut gaze = -0.3;
        let mut st = PidState::default();
        for _ in 0..2000 {
            let (u, s) = pid_step(&g, st, target - gaze, 0.01).unwrap();
            st = s;
            gaze += u * 0.01;
        }
        assert!((target - gaze).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(SupervisorConfig::default().validate().is_ok());
        let bad = SupervisorConfig { fixation_threshold: 0.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let mut bad = SupervisorConfig::default();
        bad.pursuit.kp = -1.0;
        assert!(bad.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_gains() -> impl Strategy<Value = PidGains> {
            (0.0f64..10.0, 0.0f64..10.0, 0.0f64..1.0, 0.01f64..2.0, 0.01f64..5.0).prop_map(
                |(kp, ki, kd, integral_limit, output_limit)| PidGains { kp, ki, kd, integral_limit, output_limit },
            )
        }

        proptest! {
            #[test]
            fn output_bounded(g in any_gains(), errs in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
                let mut st = PidState::default();
                for e in errs {
                    let (u, s) = pid_step(&g, st, e, 0.01).unwrap();
                    prop_assert!(u.abs() <= g.output_limit);
                    st = s;
                }
            }

            #[test]
            fn anti_windup(g in any_gains(), n in 1usize..2000) {
                let mut st = PidState::default();
                for _ in 0..n {
                    st = pid_step(&g, st, 1.0, 0.01).unwrap().1;
                    prop_assert!((g.ki * st.integral).abs() <= g.integral_limit * (1.0 + 1e-12));
                }
            }

            #[test]
            fn vor_superposition(yaw in -5.0f64..5.0, pitch in -5.0f64..5.0, gain in 0.0f64..2.0) {
                let cfg = SupervisorConfig { vor_gain: gain, ..Default::default() };
                let mut pid = [PidState::default(); 2];
                let head = HeadRate { yaw, pitch };
                let mode = MovementMode { base: BaseMode::Fixation, vor_active: true };
                let r = gaze_command(&cfg, mode, Some((0.0, 0.0)), head, 0.01, &mut pid).unwrap();
                prop_assert_eq!(r.pan, -gain * yaw);
                prop_assert_eq!(r.tilt, -gain * pitch);
            }
        }
    }
}
