//! Fixed-step closed loop: camera → controller → servo bus → plant.

use super::scenario::Scenario;
use super::trace::{Trace, TraceRecord};
use super::{ServoIds, SimConfig, SimError};
use crate::control::{EyeCommand, GazeController, HeadRate, SupervisorConfig};
use crate::plant::{clamp_gaze, gaze_to_servo, servo_to_gaze, GazeState};
use crate::protocol::{deg_to_units, neutral_deg, units_to_deg, ServoBus, SimBus, SimServo, BROADCAST_ID};
use crate::vision::{normalized_error, Eye, FaceObservation, FaceSource, FaceTarget, GroundTruthDetector, HeadPose, Scene};

/// Replaces the scripted world once a live command arrives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LiveWorld {
    target: FaceTarget,
    head: HeadPose,
}

/// Steppable simulation. One [`Simulator::step`] is one control tick.
pub struct Simulator {
    cfg: SimConfig,
    scenario: Scenario,
    dt: f64,
    bus: ServoBus<SimBus>,
    detector: Box<dyn FaceSource + Send>,
    controller: GazeController,
    tick: u64,
    goal: [GazeState; 2],
    measured: [GazeState; 2],
    units: [[u16; 2]; 2],
    last_obs: [FaceObservation; 2],
    prev_head: Option<HeadPose>,
    live: Option<LiveWorld>,
}

impl Simulator {
    pub fn new(scenario: Scenario, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        scenario.validate()?;
        let detector = GroundTruthDetector::new(cfg.geometry, cfg.camera, scenario.noise_std, scenario.seed);
        Self::with_face_source(scenario, cfg, Box::new(detector))
    }

    /// Uses `source` instead of the ground-truth detector.
    pub fn with_face_source(
        scenario: Scenario,
        cfg: SimConfig,
        source: Box<dyn FaceSource + Send>,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        scenario.validate()?;
        let goal = scenario.initial_gaze.map(|g| clamp_gaze(&cfg.geometry, g).0);
        let mut units = [[0u16; 2]; 2];
        let mut servos = Vec::with_capacity(4);
        for eye in Eye::BOTH {
            let u = gaze_units(&cfg, goal[eye.index()])?;
            units[eye.index()] = u;
            let ids = cfg.servo_ids.of(eye);
            servos.push(SimServo::new(ids[0], cfg.servo_model, u[0]));
            servos.push(SimServo::new(ids[1], cfg.servo_model, u[1]));
        }
        let bus = SimBus::new(servos).with_latency(cfg.bus_latency);
        let mut bus = ServoBus::new(bus).with_timeout(std::time::Duration::from_secs_f64(
            (cfg.bus_latency + 1e-3).max(1e-3),
        ));
        bus.set_torque(BROADCAST_ID, true)?;

        let measured = units.map(|u| units_gaze(&cfg, u));
        let dt = 1.0 / cfg.control_rate;
        Ok(Self {
            controller: GazeController::new(cfg.supervisor),
            cfg,
            scenario,
            dt,
            bus,
            detector: source,
            tick: 0,
            goal,
            measured,
            units,
            last_obs: [FaceObservation::lost(Eye::Left, 0.0), FaceObservation::lost(Eye::Right, 0.0)],
            prev_head: None,
            live: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Number of ticks covering `[0, duration]` inclusive.
    pub fn total_ticks(&self) -> u64 {
        (self.scenario.duration * self.cfg.control_rate).round() as u64 + 1
    }

    pub fn bus(&self) -> &ServoBus<SimBus> {
        &self.bus
    }

    pub fn measured_gaze(&self) -> [GazeState; 2] {
        self.measured
    }

    pub fn target(&self) -> FaceTarget {
        match self.live {
            Some(w) => w.target,
            None => self.scenario.target_at(self.time()),
        }
    }

    pub fn head(&self) -> HeadPose {
        match self.live {
            Some(w) => w.head,
            None => self.scenario.head_at(self.time()),
        }
    }

    fn go_live(&mut self) -> &mut LiveWorld {
        let (target, head) = (self.target(), self.head());
        self.live.get_or_insert(LiveWorld { target, head })
    }

    /// Freeze the scripted world and move the face to `target`.
    pub fn set_target(&mut self, target: FaceTarget) {
        self.go_live().target = target;
    }

    pub fn set_head(&mut self, head: HeadPose) {
        self.go_live().head = head;
    }

    pub fn supervisor(&self) -> &SupervisorConfig {
        self.controller.config()
    }

    pub fn set_supervisor(&mut self, cfg: SupervisorConfig) -> Result<(), SimError> {
        cfg.validate()?;
        self.cfg.supervisor = cfg;
        self.controller.set_config(cfg);
        Ok(())
    }

    fn is_frame_tick(&self) -> bool {
        if self.tick == 0 {
            return true;
        }
        let frame = |k: u64| ((k as f64) * self.cfg.camera_rate / self.cfg.control_rate + 1e-9).floor();
        frame(self.tick) > frame(self.tick - 1)
    }

    /// Advance one control tick and return the records for both eyes at the
    /// start of the tick.
    pub fn step(&mut self) -> Result<[TraceRecord; 2], SimError> {
        let t = self.time();
        let head = self.head();
        let target = self.target();
        let prev = self.prev_head.unwrap_or(head);
        let head_rate = HeadRate {
            yaw: (head.yaw - prev.yaw) / self.dt,
            pitch: (head.pitch - prev.pitch) / self.dt,
        };
        self.prev_head = Some(head);

        let fresh = self.is_frame_tick();
        if fresh {
            let scene = Scene { target, head, gaze: self.measured };
            for eye in Eye::BOTH {
                self.last_obs[eye.index()] = self.detector.next_observation(eye, t, &scene);
            }
        }
        let errors = self.last_obs.map(|o| normalized_error(&o, &self.cfg.camera));
        let commands = self.controller.step(errors, head_rate, self.dt)?;

        let mut goals = Vec::with_capacity(4);
        for eye in Eye::BOTH {
            let i = eye.index();
            let rate = commands[i].rate;
            let next = GazeState::new(
                self.goal[i].pan + rate.pan * self.dt,
                self.goal[i].tilt + rate.tilt * self.dt,
            );
            self.goal[i] = clamp_gaze(&self.cfg.geometry, next).0;
            let u = gaze_units(&self.cfg, self.goal[i])?;
            let ids = self.cfg.servo_ids.of(eye);
            goals.push((ids[0], u[0]));
            goals.push((ids[1], u[1]));
        }
        self.bus.sync_write_goal_units(&goals)?;

        let records = Eye::BOTH.map(|eye| self.record(eye, t, fresh, head, &target, &errors, &commands));

        self.bus.transport_mut().advance(self.dt);
        for eye in Eye::BOTH {
            let ids = self.cfg.servo_ids.of(eye);
            let h = self.bus.read_present_position_units(ids[0])?;
            let v = self.bus.read_present_position_units(ids[1])?;
            self.units[eye.index()] = [h, v];
            self.measured[eye.index()] = units_gaze(&self.cfg, [h, v]);
        }
        self.tick += 1;
        Ok(records)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        eye: Eye,
        t: f64,
        fresh: bool,
        head: HeadPose,
        target: &FaceTarget,
        errors: &[Option<(f64, f64)>; 2],
        commands: &[EyeCommand; 2],
    ) -> TraceRecord {
        let i = eye.index();
        let obs = &self.last_obs[i];
        let (ex, ey) = errors[i].unwrap_or((f64::NAN, f64::NAN));
        let ids = self.cfg.servo_ids.of(eye);
        let servo_deg = |id| self.bus.transport().servo(id).map(|s| s.state().position).unwrap_or(f64::NAN);
        TraceRecord {
            tick: self.tick,
            t,
            eye,
            u: obs.u,
            v: obs.v,
            valid: obs.valid,
            ex,
            ey,
            pan_deg: self.measured[i].pan.to_degrees(),
            tilt_deg: self.measured[i].tilt.to_degrees(),
            servo_h_units: self.units[i][0],
            servo_v_units: self.units[i][1],
            servo_h_deg: servo_deg(ids[0]),
            servo_v_deg: servo_deg(ids[1]),
            mode: commands[i].mode.base,
            vor_active: commands[i].mode.vor_active,
            rate: commands[i].rate,
            head_yaw: head.yaw.to_degrees(),
            head_pitch: head.pitch.to_degrees(),
            fresh_frame: fresh,
            target: [target.position.x, target.position.y, target.position.z],
        }
    }

    /// Run the remaining ticks of the scenario.
    pub fn run_to_end(mut self) -> Result<Trace, SimError> {
        let mut trace = Trace::new(
            &self.scenario.name,
            self.cfg.camera,
            self.dt,
            self.cfg.supervisor.pursuit.output_limit.max(self.cfg.supervisor.saccade_rate),
            self.cfg.servo_model.max_speed,
        );
        let n = self.total_ticks();
        trace.records.reserve(2 * n as usize);
        while self.tick < n {
            trace.records.extend(self.step()?);
        }
        Ok(trace)
    }
}

fn gaze_units(cfg: &SimConfig, gaze: GazeState) -> Result<[u16; 2], SimError> {
    let (h, v) = gaze_to_servo(&cfg.geometry, gaze)?;
    let n = neutral_deg();
    Ok([deg_to_units(n + h)?, deg_to_units(n + v)?])
}

fn units_gaze(cfg: &SimConfig, units: [u16; 2]) -> GazeState {
    let n = neutral_deg();
    let h = units_to_deg(units[0]).unwrap_or(n) - n;
    let v = units_to_deg(units[1]).unwrap_or(n) - n;
    servo_to_gaze(&cfg.geometry, h, v).0
}

/// Run `scenario` from start to finish.
pub fn run(scenario: &Scenario, cfg: &SimConfig) -> Result<Trace, SimError> {
    Simulator::new(scenario.clone(), cfg.clone())?.run_to_end()
}

impl ServoIds {
    pub fn of(&self, eye: Eye) -> [u8; 2] {
        match eye {
            Eye::Left => [self.left_h, self.left_v],
            Eye::Right => [self.right_h, self.right_v],
        }
    }
}
