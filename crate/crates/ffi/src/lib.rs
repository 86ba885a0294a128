//! C ABI over `ocular-core`.
//!
//! Every function returns an [`OcularStatus`]; on failure a message for the
//! calling thread is available from [`ocular_last_error`]. Simulators are
//! opaque handles created by [`ocular_sim_new`] and released with
//! [`ocular_sim_free`]. Functions writing into caller buffers report the
//! required size through their `*_len` out-parameter when the buffer is too
//! small.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ocular_core::config::{Config, Experiment};
use ocular_core::control::BaseMode;
use ocular_core::plant::{gaze_to_servo, servo_to_gaze, EyeGeometry, GazeState};
use ocular_core::protocol::{crc16, decode_packet, encode_packet, Instruction, InstructionPacket, Packet};
use ocular_core::sim::{Simulator, TraceRecord};
use ocular_core::vision::{FaceTarget, HeadPose};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcularStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    DecodeError = 4,
    ConfigError = 5,
    SimError = 6,
    Panic = 7,
}

/// Header fields of a decoded frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OcularPacketInfo {
    pub id: u8,
    /// Instruction code, or 0x55 for a status packet.
    pub instruction: u8,
    pub is_status: u8,
    /// Error byte of a status packet, 0 otherwise.
    pub error: u8,
    pub params_len: usize,
}

/// One eye at one control tick. `u`, `v`, `ex`, `ey` are NaN without a
/// detection.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OcularEyeState {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub ex: f64,
    pub ey: f64,
    pub pan_deg: f64,
    pub tilt_deg: f64,
    pub rate_pan: f64,
    pub rate_tilt: f64,
    pub servo_h_units: u16,
    pub servo_v_units: u16,
    pub valid: u8,
    /// 0 saccade, 1 smooth pursuit, 2 fixation.
    pub mode: u8,
    pub vor_active: u8,
}

/// Opaque simulator handle.
pub struct OcularSim {
    sim: Simulator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: OcularStatus, msg: impl std::fmt::Display) -> OcularStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> OcularStatus) -> OcularStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(OcularStatus::Panic, "internal panic"),
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

/// Copy `src` into the caller buffer, always reporting the full length.
unsafe fn copy_out(src: &[u8], out: *mut u8, cap: usize, out_len: *mut usize) -> OcularStatus {
    *out_len = src.len();
    if src.len() > cap {
        return fail(
            OcularStatus::BufferTooSmall,
            format!("buffer holds {cap} bytes, {} needed", src.len()),
        );
    }
    if !src.is_empty() {
        if out.is_null() {
            return fail(OcularStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    OcularStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ocular_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the last failure on this thread. Valid until the next
/// failing call on the same thread; empty if nothing failed yet.
#[no_mangle]
pub extern "C" fn ocular_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// CRC-16 (polynomial 0x8005) of `len` bytes. A null `data` with non-zero
/// `len` yields 0.
#[no_mangle]
pub unsafe extern "C" fn ocular_crc16(data: *const u8, len: usize) -> u16 {
    bytes(data, len).map_or(0, crc16)
}

/// Encode an instruction frame (ping 0x01, read 0x02, write 0x03, sync write
/// 0x83) with byte stuffing and CRC.
#[no_mangle]
pub unsafe extern "C" fn ocular_encode_instruction(
    id: u8,
    instruction: u8,
    params: *const u8,
    params_len: usize,
    out: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> OcularStatus {
    guard(|| {
        if out_len.is_null() {
            return fail(OcularStatus::NullPointer, "out_len is null");
        }
        let Some(params) = bytes(params, params_len) else {
            return fail(OcularStatus::NullPointer, "params is null");
        };
        let Some(instr) = Instruction::from_code(instruction) else {
            return fail(OcularStatus::InvalidArgument, format!("unknown instruction 0x{instruction:02x}"));
        };
        match encode_packet(&InstructionPacket::new(id, instr, params.to_vec())) {
            Ok(frame) => copy_out(&frame, out, out_cap, out_len),
            Err(e) => fail(OcularStatus::InvalidArgument, e),
        }
    })
}

/// Decode one complete frame. Parameters (after de-stuffing, without the
/// status error byte) are copied into `params_out`.
#[no_mangle]
pub unsafe extern "C" fn ocular_decode(
    frame: *const u8,
    len: usize,
    info: *mut OcularPacketInfo,
    params_out: *mut u8,
    params_cap: usize,
    params_len: *mut usize,
) -> OcularStatus {
    guard(|| {
        if info.is_null() || params_len.is_null() {
            return fail(OcularStatus::NullPointer, "info or params_len is null");
        }
        let Some(frame) = bytes(frame, len) else {
            return fail(OcularStatus::NullPointer, "frame is null");
        };
        let packet = match decode_packet(frame) {
            Ok(p) => p,
            Err(e) => return fail(OcularStatus::DecodeError, e),
        };
        let (head, params) = match &packet {
            Packet::Instruction(p) => (
                OcularPacketInfo {
                    id: p.id,
                    instruction: p.instruction.code(),
                    is_status: 0,
                    error: 0,
                    params_len: p.params.len(),
                },
                &p.params,
            ),
            Packet::Status(p) => (
                OcularPacketInfo {
                    id: p.id,
                    instruction: ocular_core::protocol::packet::STATUS_INSTRUCTION,
                    is_status: 1,
                    error: p.error,
                    params_len: p.params.len(),
                },
                &p.params,
            ),
        };
        *info = head;
        copy_out(params, params_out, params_cap, params_len)
    })
}

/// Servo angles (deg from neutral) for a gaze in degrees, default geometry.
#[no_mangle]
pub unsafe extern "C" fn ocular_gaze_to_servo(
    pan_deg: f64,
    tilt_deg: f64,
    h_deg: *mut f64,
    v_deg: *mut f64,
) -> OcularStatus {
    guard(|| {
        if h_deg.is_null() || v_deg.is_null() {
            return fail(OcularStatus::NullPointer, "output pointer is null");
        }
        match gaze_to_servo(&EyeGeometry::default(), GazeState::from_degrees(pan_deg, tilt_deg)) {
            Ok((h, v)) => {
                *h_deg = h;
                *v_deg = v;
                OcularStatus::Ok
            }
            Err(e) => fail(OcularStatus::InvalidArgument, e),
        }
    })
}

/// Inverse of [`ocular_gaze_to_servo`]; out-of-range gazes are clamped and
/// `clamped` is set to 1.
#[no_mangle]
pub unsafe extern "C" fn ocular_servo_to_gaze(
    h_deg: f64,
    v_deg: f64,
    pan_deg: *mut f64,
    tilt_deg: *mut f64,
    clamped: *mut u8,
) -> OcularStatus {
    guard(|| {
        if pan_deg.is_null() || tilt_deg.is_null() {
            return fail(OcularStatus::NullPointer, "output pointer is null");
        }
        if !(h_deg.is_finite() && v_deg.is_finite()) {
            return fail(OcularStatus::InvalidArgument, "servo angles must be finite");
        }
        let (g, c) = servo_to_gaze(&EyeGeometry::default(), h_deg, v_deg);
        *pan_deg = g.pan.to_degrees();
        *tilt_deg = g.tilt.to_degrees();
        if !clamped.is_null() {
            *clamped = c as u8;
        }
        OcularStatus::Ok
    })
}

unsafe fn opt_str<'a>(s: *const c_char) -> Result<Option<&'a str>, OcularStatus> {
    if s.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Some)
        .map_err(|_| fail(OcularStatus::InvalidArgument, "string is not UTF-8"))
}

/// Create a simulator for `experiment` ("saccade", "pursuit", "vergence",
/// "vor"). `config_toml` is TOML text or null for defaults.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_new(
    experiment: *const c_char,
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut OcularSim,
) -> OcularStatus {
    guard(|| {
        if out.is_null() {
            return fail(OcularStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let exp = match opt_str(experiment) {
            Ok(Some(s)) => s,
            Ok(None) => return fail(OcularStatus::NullPointer, "experiment is null"),
            Err(s) => return s,
        };
        let exp: Experiment = match exp.parse() {
            Ok(e) => e,
            Err(e) => return fail(OcularStatus::InvalidArgument, e),
        };
        let mut cfg = match opt_str(config_toml) {
            Ok(Some(text)) => match Config::from_toml(text) {
                Ok(c) => c,
                Err(e) => return fail(OcularStatus::ConfigError, e),
            },
            Ok(None) => Config::default(),
            Err(s) => return s,
        };
        cfg.sim.seed = seed;
        let sim = cfg
            .scenario(exp)
            .map_err(|e| e.to_string())
            .and_then(|s| Simulator::new(s, cfg.sim_config()).map_err(|e| e.to_string()));
        match sim {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(OcularSim { sim }));
                OcularStatus::Ok
            }
            Err(e) => fail(OcularStatus::SimError, e),
        }
    })
}

fn eye_state(r: &TraceRecord) -> OcularEyeState {
    OcularEyeState {
        t: r.t,
        u: r.u,
        v: r.v,
        ex: r.ex,
        ey: r.ey,
        pan_deg: r.pan_deg,
        tilt_deg: r.tilt_deg,
        rate_pan: r.rate.pan,
        rate_tilt: r.rate.tilt,
        servo_h_units: r.servo_h_units,
        servo_v_units: r.servo_v_units,
        valid: r.valid as u8,
        mode: match r.mode {
            BaseMode::Saccade => 0,
            BaseMode::SmoothPursuit => 1,
            BaseMode::Fixation => 2,
        },
        vor_active: r.vor_active as u8,
    }
}

/// Advance one control tick. `out` receives two states, left then right,
/// describing the start of the tick.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_step(sim: *mut OcularSim, out: *mut OcularEyeState) -> OcularStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(OcularStatus::NullPointer, "sim is null");
        };
        match sim.sim.step() {
            Ok(recs) => {
                if !out.is_null() {
                    *out = eye_state(&recs[0]);
                    *out.add(1) = eye_state(&recs[1]);
                }
                OcularStatus::Ok
            }
            Err(e) => fail(OcularStatus::SimError, e),
        }
    })
}

/// Simulated time of the next tick, s; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_time(sim: *const OcularSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.sim.time())
}

/// Number of ticks in the scripted experiment.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_total_ticks(sim: *const OcularSim) -> u64 {
    sim.as_ref().map_or(0, |s| s.sim.total_ticks())
}

/// Replace the scripted face position (m) from the next tick on.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_set_target(sim: *mut OcularSim, x: f64, y: f64, z: f64) -> OcularStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(OcularStatus::NullPointer, "sim is null");
        };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return fail(OcularStatus::InvalidArgument, "target must be finite");
        }
        let face_width = sim.sim.target().face_width;
        let mut t = FaceTarget::at(x, y, z);
        t.face_width = face_width;
        sim.sim.set_target(t);
        OcularStatus::Ok
    })
}

/// Replace the scripted head pose (deg) from the next tick on.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_set_head(sim: *mut OcularSim, yaw_deg: f64, pitch_deg: f64) -> OcularStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(OcularStatus::NullPointer, "sim is null");
        };
        if !(yaw_deg.is_finite() && pitch_deg.is_finite()) {
            return fail(OcularStatus::InvalidArgument, "head angles must be finite");
        }
        sim.sim.set_head(HeadPose::new(yaw_deg.to_radians(), pitch_deg.to_radians()));
        OcularStatus::Ok
    })
}

/// Release a simulator. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ocular_sim_free(sim: *mut OcularSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
