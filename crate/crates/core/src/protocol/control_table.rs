//! XL-320 control-table subset and position unit conversion.

use thiserror::Error;

/// Full-scale position value.
pub const POSITION_MAX_UNITS: u16 = 1023;
/// Mechanical travel covered by 0..=1023.
pub const POSITION_RANGE_DEG: f64 = 300.0;
/// Model number reported by PING.
pub const XL320_MODEL_NUMBER: u16 = 350;
pub const XL320_FIRMWARE_VERSION: u8 = 29;
/// Degrees per second for one MOVING_SPEED unit (0.111 rpm).
pub const SPEED_UNIT_DEG_S: f64 = 0.111 * 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Register {
    pub name: &'static str,
    pub address: u16,
    pub size: u16,
    pub access: Access,
    /// Largest legal value; writes above it are rejected with a range error.
    pub max: u16,
}

impl Register {
    pub const fn end(&self) -> u16 {
        self.address + self.size
    }
}

pub const TORQUE_ENABLE: Register = Register {
    name: "TORQUE_ENABLE",
    address: 24,
    size: 1,
    access: Access::ReadWrite,
    max: 1,
};
pub const GOAL_POSITION: Register = Register {
    name: "GOAL_POSITION",
    address: 30,
    size: 2,
    access: Access::ReadWrite,
    max: POSITION_MAX_UNITS,
};
pub const MOVING_SPEED: Register = Register {
    name: "MOVING_SPEED",
    address: 32,
    size: 2,
    access: Access::ReadWrite,
    max: 2047,
};
pub const PRESENT_POSITION: Register = Register {
    name: "PRESENT_POSITION",
    address: 37,
    size: 2,
    access: Access::Read,
    max: POSITION_MAX_UNITS,
};

/// Sorted by address, non-overlapping.
pub const REGISTERS: [Register; 4] = [TORQUE_ENABLE, GOAL_POSITION, MOVING_SPEED, PRESENT_POSITION];

/// Bytes backing the register file (addresses `0..TABLE_SIZE`).
pub const TABLE_SIZE: usize = PRESENT_POSITION.end() as usize;

pub fn register_at(address: u16) -> Option<&'static Register> {
    REGISTERS.iter().find(|r| r.address == address)
}

/// The registers exactly covering `[address, address + len)`, or `None` if
/// the span touches an unmapped byte or splits a register.
pub fn registers_spanning(address: u16, len: u16) -> Option<Vec<&'static Register>> {
    if len == 0 {
        return None;
    }
    let end = address as u32 + len as u32;
    let mut out = Vec::new();
    let mut cursor = address as u32;
    while cursor < end {
        let reg = register_at(cursor as u16)?;
        cursor += reg.size as u32;
        out.push(reg);
    }
    (cursor == end).then_some(out)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitsError {
    #[error("angle {0} deg outside servo range 0-300 deg")]
    AngleOutOfRange(f64),
    #[error("position {0} outside servo range 0-1023")]
    UnitsOutOfRange(u16),
}

/// Nearest position unit; ties round away from zero.
pub fn deg_to_units(deg: f64) -> Result<u16, UnitsError> {
    if !(0.0..=POSITION_RANGE_DEG).contains(&deg) {
        return Err(UnitsError::AngleOutOfRange(deg));
    }
    Ok((deg * POSITION_MAX_UNITS as f64 / POSITION_RANGE_DEG).round() as u16)
}

pub fn units_to_deg(units: u16) -> Result<f64, UnitsError> {
    if units > POSITION_MAX_UNITS {
        return Err(UnitsError::UnitsOutOfRange(units));
    }
    Ok(units as f64 * POSITION_RANGE_DEG / POSITION_MAX_UNITS as f64)
}

/// Servo angle of the neutral horn position (gaze straight ahead). Chosen as
/// the exact angle of unit 512 so that zero gaze is representable without
/// quantization error.
pub fn neutral_deg() -> f64 {
    512.0 * POSITION_RANGE_DEG / POSITION_MAX_UNITS as f64
}
