use std::io::{self, Write};

use crate::control::{BaseMode, GazeRate};
use crate::vision::{CameraModel, Eye};

pub const CSV_HEADER: &str = "t,eye,u,v,valid,ex,ey,pan_deg,tilt_deg,servo_h_units,servo_v_units,mode,vor_active,head_yaw,head_pitch";

/// State of one eye at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    /// s
    pub t: f64,
    pub eye: Eye,
    /// Face centre held from the latest camera frame, px.
    pub u: f64,
    pub v: f64,
    pub valid: bool,
    /// Normalised error; NaN without a measurement.
    pub ex: f64,
    pub ey: f64,
    /// Gaze measured from the quantized servo positions, deg.
    pub pan_deg: f64,
    pub tilt_deg: f64,
    /// PRESENT_POSITION of the horizontal and vertical servo.
    pub servo_h_units: u16,
    pub servo_v_units: u16,
    /// Continuous actuator positions behind the registers, deg.
    pub servo_h_deg: f64,
    pub servo_v_deg: f64,
    pub mode: BaseMode,
    pub vor_active: bool,
    /// Commanded gaze rate, rad/s.
    pub rate: GazeRate,
    /// deg
    pub head_yaw: f64,
    pub head_pitch: f64,
    /// True on ticks where a new camera frame arrived.
    pub fresh_frame: bool,
    /// Face position, m.
    pub target: [f64; 3],
}

impl TraceRecord {
    /// ‖e‖∞, or `None` without a measurement.
    pub fn error_inf(&self) -> Option<f64> {
        self.valid.then(|| self.ex.abs().max(self.ey.abs()))
    }

    pub fn write_csv_row<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.eye.label(),
            self.u,
            self.v,
            self.valid as u8,
            self.ex,
            self.ey,
            self.pan_deg,
            self.tilt_deg,
            self.servo_h_units,
            self.servo_v_units,
            self.mode.label(),
            self.vor_active as u8,
            self.head_yaw,
            self.head_pitch
        )
    }
}

/// Time-ordered records, two per tick (left then right).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub camera: CameraModel,
    /// s
    pub dt: f64,
    /// rad/s
    pub output_limit: f64,
    /// deg/s
    pub servo_max_speed: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(scenario: &str, camera: CameraModel, dt: f64, output_limit: f64, servo_max_speed: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            camera,
            dt,
            output_limit,
            servo_max_speed,
            records: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn eye(&self, eye: Eye) -> impl Iterator<Item = &TraceRecord> + '_ {
        self.records.iter().filter(move |r| r.eye == eye)
    }

    /// Records of both eyes at each tick, in tick order.
    pub fn ticks(&self) -> impl Iterator<Item = (&TraceRecord, &TraceRecord)> + '_ {
        self.records.chunks_exact(2).map(|c| (&c[0], &c[1]))
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            r.write_csv_row(w)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}
