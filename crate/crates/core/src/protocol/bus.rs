//! Servo bus: transport port, simulated XL-320 servos and the high-level
//! driver that talks to them through encoded frames.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::time::Duration;

use thiserror::Error;

use super::control_table::{
    self, deg_to_units, registers_spanning, units_to_deg, Access, UnitsError, GOAL_POSITION,
    MOVING_SPEED, PRESENT_POSITION, SPEED_UNIT_DEG_S, TABLE_SIZE, TORQUE_ENABLE,
    XL320_FIRMWARE_VERSION, XL320_MODEL_NUMBER,
};
use super::packet::{
    decode_packet, encode_packet, encode_status, EncodeError, Instruction, InstructionPacket,
    Packet, PacketDecoder, StatusPacket, BROADCAST_ID,
};
use crate::plant::{step_servo, ServoModel, ServoState};

/// Status error byte values.
pub mod status_error {
    pub const RESULT_FAIL: u8 = 0x01;
    pub const INSTRUCTION: u8 = 0x02;
    pub const DATA_RANGE: u8 = 0x04;
    pub const DATA_LENGTH: u8 = 0x05;
    pub const ACCESS: u8 = 0x07;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusError {
    #[error("no status from id {id} within deadline")]
    Timeout { id: u8 },
    #[error("servo {id} reported error 0x{error:02x}")]
    Status { id: u8, error: u8 },
    #[error("duplicate id {0} in sync write")]
    DuplicateId(u8),
    #[error("unexpected reply from id {id}: {reason}")]
    UnexpectedReply { id: u8, reason: &'static str },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Units(#[from] UnitsError),
}

/// Byte transport underneath the driver. Implementations may deliver a frame
/// in several chunks; the driver reassembles them.
pub trait BusTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), BusError>;
    /// Next chunk of received bytes, or [`BusError::Timeout`] when nothing
    /// arrives within `timeout`.
    fn receive(&mut self, timeout: Duration) -> Result<Vec<u8>, BusError>;
}

/// Echoes every sent chunk back to the receiver.
#[derive(Debug, Default)]
pub struct LoopbackTransport {
    queue: VecDeque<Vec<u8>>,
}

impl BusTransport for LoopbackTransport {
    fn send(&mut self, bytes: &[u8]) -> Result<(), BusError> {
        self.queue.push_back(bytes.to_vec());
        Ok(())
    }

    fn receive(&mut self, _timeout: Duration) -> Result<Vec<u8>, BusError> {
        self.queue.pop_front().ok_or(BusError::Timeout { id: BROADCAST_ID })
    }
}

/// One simulated XL-320 with its register file and actuator surrogate.
#[derive(Debug, Clone)]
pub struct SimServo {
    id: u8,
    regs: [u8; TABLE_SIZE],
    model: ServoModel,
    state: ServoState,
    instant: bool,
}

impl SimServo {
    /// Servo at rest at `units`, torque off.
    pub fn new(id: u8, model: ServoModel, units: u16) -> Self {
        let units = units.min(control_table::POSITION_MAX_UNITS);
        let deg = units_to_deg(units).unwrap_or_default();
        let mut s = Self {
            id,
            regs: [0; TABLE_SIZE],
            model,
            state: ServoState::at(deg),
            instant: false,
        };
        s.put(&GOAL_POSITION, units);
        s.put(&PRESENT_POSITION, units);
        s
    }

    /// Servo that reaches its goal as soon as it is written.
    pub fn instant(mut self) -> Self {
        self.instant = true;
        self
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn state(&self) -> ServoState {
        self.state
    }

    pub fn registers(&self) -> &[u8; TABLE_SIZE] {
        &self.regs
    }

    pub fn get(&self, reg: &control_table::Register) -> u16 {
        let a = reg.address as usize;
        match reg.size {
            1 => self.regs[a] as u16,
            _ => u16::from_le_bytes([self.regs[a], self.regs[a + 1]]),
        }
    }

    fn put(&mut self, reg: &control_table::Register, value: u16) {
        let a = reg.address as usize;
        match reg.size {
            1 => self.regs[a] = value as u8,
            _ => self.regs[a..a + 2].copy_from_slice(&value.to_le_bytes()),
        }
    }

    pub fn torque_enabled(&self) -> bool {
        self.get(&TORQUE_ENABLE) != 0
    }

    pub fn read(&self, address: u16, len: u16) -> Result<Vec<u8>, u8> {
        registers_spanning(address, len).ok_or(status_error::ACCESS)?;
        let a = address as usize;
        Ok(self.regs[a..a + len as usize].to_vec())
    }

    /// Validates the whole span before touching anything.
    pub fn write(&mut self, address: u16, data: &[u8]) -> Result<(), u8> {
        let len = u16::try_from(data.len()).map_err(|_| status_error::DATA_LENGTH)?;
        let regs = registers_spanning(address, len).ok_or(status_error::ACCESS)?;
        let mut values = Vec::with_capacity(regs.len());
        let mut off = 0usize;
        for reg in &regs {
            if reg.access != Access::ReadWrite {
                return Err(status_error::ACCESS);
            }
            let v = match reg.size {
                1 => data[off] as u16,
                _ => u16::from_le_bytes([data[off], data[off + 1]]),
            };
            if v > reg.max {
                return Err(status_error::DATA_RANGE);
            }
            values.push((**reg, v));
            off += reg.size as usize;
        }
        for (reg, v) in values {
            self.put(&reg, v);
            if reg == GOAL_POSITION {
                self.state.goal = units_to_deg(v).unwrap_or(self.state.goal);
                if self.instant {
                    self.state.position = self.state.goal;
                    self.sync_present();
                }
            }
        }
        Ok(())
    }

    fn sync_present(&mut self) {
        let units = deg_to_units(self.state.position.clamp(0.0, control_table::POSITION_RANGE_DEG))
            .unwrap_or(0);
        self.put(&PRESENT_POSITION, units);
    }

    fn effective_model(&self) -> ServoModel {
        let speed = self.get(&MOVING_SPEED) & 0x3FF;
        let mut m = self.model;
        if speed != 0 {
            m.max_speed = m.max_speed.min(speed as f64 * SPEED_UNIT_DEG_S);
        }
        m
    }

    /// Advance the actuator by `dt` seconds.
    pub fn step(&mut self, dt: f64) {
        if !self.torque_enabled() || self.instant || !(dt > 0.0) {
            return;
        }
        if let Ok(s) = step_servo(&self.effective_model(), self.state, dt) {
            self.state = s;
        }
        self.sync_present();
    }

    fn status(&self, error: u8, params: Vec<u8>) -> StatusPacket {
        StatusPacket { id: self.id, error, params }
    }
}

/// In-process bus with a set of simulated servos. Responses are queued and
/// released after `latency` of simulated time.
#[derive(Debug, Clone, Default)]
pub struct SimBus {
    servos: BTreeMap<u8, SimServo>,
    latency: f64,
    clock: f64,
    pending: VecDeque<(f64, Vec<u8>)>,
    dropped: u64,
}

impl SimBus {
    pub fn new(servos: impl IntoIterator<Item = SimServo>) -> Self {
        Self {
            servos: servos.into_iter().map(|s| (s.id, s)).collect(),
            ..Self::default()
        }
    }

    /// Fixed status latency in seconds of simulated time.
    pub fn with_latency(mut self, latency: f64) -> Self {
        self.latency = latency.max(0.0);
        self
    }

    pub fn servo(&self, id: u8) -> Option<&SimServo> {
        self.servos.get(&id)
    }

    pub fn servos(&self) -> impl Iterator<Item = &SimServo> {
        self.servos.values()
    }

    /// Frames that failed to decode and were ignored.
    pub fn dropped_frames(&self) -> u64 {
        self.dropped
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Advance simulated time and every servo by `dt`.
    pub fn advance(&mut self, dt: f64) {
        self.clock += dt;
        for s in self.servos.values_mut() {
            s.step(dt);
        }
    }

    /// Apply one frame to the servos and return the concatenated status
    /// frames they answer with.
    pub fn dispatch(&mut self, frame: &[u8]) -> Vec<u8> {
        self.respond(frame).concat()
    }

    fn respond(&mut self, frame: &[u8]) -> Vec<Vec<u8>> {
        let packet = match decode_packet(frame) {
            Ok(Packet::Instruction(p)) => p,
            Ok(Packet::Status(_)) => return Vec::new(),
            Err(_) => {
                self.dropped += 1;
                return Vec::new();
            }
        };
        self.execute(&packet)
            .iter()
            .filter_map(|s| encode_status(s).ok())
            .collect()
    }

    fn execute(&mut self, p: &InstructionPacket) -> Vec<StatusPacket> {
        let broadcast = p.id == BROADCAST_ID;
        let targets: Vec<u8> = if broadcast {
            self.servos.keys().copied().collect()
        } else if self.servos.contains_key(&p.id) {
            vec![p.id]
        } else {
            return Vec::new();
        };

        match p.instruction {
            Instruction::Ping => targets
                .iter()
                .map(|id| {
                    let mut params = XL320_MODEL_NUMBER.to_le_bytes().to_vec();
                    params.push(XL320_FIRMWARE_VERSION);
                    self.servos[id].status(0, params)
                })
                .collect(),
            // READ has no broadcast form.
            Instruction::Read if broadcast => Vec::new(),
            Instruction::Read => {
                let s = &self.servos[&p.id];
                if p.params.len() != 4 {
                    return vec![s.status(status_error::DATA_LENGTH, Vec::new())];
                }
                let addr = u16::from_le_bytes([p.params[0], p.params[1]]);
                let len = u16::from_le_bytes([p.params[2], p.params[3]]);
                match s.read(addr, len) {
                    Ok(data) => vec![s.status(0, data)],
                    Err(e) => vec![s.status(e, Vec::new())],
                }
            }
            Instruction::Write => {
                let mut replies = Vec::new();
                for id in targets {
                    let s = self.servos.get_mut(&id).expect("target exists");
                    let res = if p.params.len() < 3 {
                        Err(status_error::DATA_LENGTH)
                    } else {
                        let addr = u16::from_le_bytes([p.params[0], p.params[1]]);
                        s.write(addr, &p.params[2..])
                    };
                    if !broadcast {
                        replies.push(s.status(res.err().unwrap_or(0), Vec::new()));
                    }
                }
                replies
            }
            Instruction::SyncWrite => {
                if !broadcast || p.params.len() < 4 {
                    return Vec::new();
                }
                let addr = u16::from_le_bytes([p.params[0], p.params[1]]);
                let len = u16::from_le_bytes([p.params[2], p.params[3]]) as usize;
                let body = &p.params[4..];
                if len == 0 || !body.len().is_multiple_of(len + 1) {
                    return Vec::new();
                }
                for chunk in body.chunks(len + 1) {
                    if let Some(s) = self.servos.get_mut(&chunk[0]) {
                        // no status on sync write; a rejected entry leaves the servo untouched
                        let _ = s.write(addr, &chunk[1..]);
                    }
                }
                Vec::new()
            }
        }
    }
}

impl BusTransport for SimBus {
    fn send(&mut self, bytes: &[u8]) -> Result<(), BusError> {
        let ready = self.clock + self.latency;
        for frame in self.respond(bytes) {
            self.pending.push_back((ready, frame));
        }
        Ok(())
    }

    fn receive(&mut self, timeout: Duration) -> Result<Vec<u8>, BusError> {
        let deadline = self.clock + timeout.as_secs_f64();
        match self.pending.front() {
            Some(&(ready, _)) if ready <= deadline => {
                self.clock = self.clock.max(ready);
                Ok(self.pending.pop_front().map(|(_, b)| b).unwrap_or_default())
            }
            _ => {
                self.clock = deadline;
                Err(BusError::Timeout { id: BROADCAST_ID })
            }
        }
    }
}

/// High-level driver issuing XL-320 register operations over a transport.
#[derive(Debug)]
pub struct ServoBus<T> {
    transport: T,
    decoder: PacketDecoder,
    timeout: Duration,
}

impl<T: BusTransport> ServoBus<T> {
    pub fn new(transport: T) -> Self {
        Self {
            transport,
            decoder: PacketDecoder::new(),
            timeout: Duration::from_millis(10),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn into_inner(self) -> T {
        self.transport
    }

    fn send(&mut self, p: &InstructionPacket) -> Result<(), BusError> {
        let frame = encode_packet(p)?;
        self.transport.send(&frame)
    }

    fn await_status(&mut self, id: u8) -> Result<StatusPacket, BusError> {
        loop {
            while let Some(res) = self.decoder.next_packet() {
                match res {
                    Ok(Packet::Status(s)) if s.id == id => return Ok(s),
                    // foreign or corrupt frames are skipped
                    _ => {}
                }
            }
            match self.transport.receive(self.timeout) {
                Ok(bytes) => self.decoder.push(&bytes),
                Err(BusError::Timeout { .. }) => return Err(BusError::Timeout { id }),
                Err(e) => return Err(e),
            }
        }
    }

    fn transact(&mut self, p: &InstructionPacket) -> Result<StatusPacket, BusError> {
        self.send(p)?;
        let s = self.await_status(p.id)?;
        if s.error != 0 {
            return Err(BusError::Status { id: s.id, error: s.error });
        }
        Ok(s)
    }

    /// Model number and firmware version of `id`.
    pub fn ping(&mut self, id: u8) -> Result<(u16, u8), BusError> {
        let s = self.transact(&InstructionPacket::ping(id))?;
        match s.params.as_slice() {
            [lo, hi, fw] => Ok((u16::from_le_bytes([*lo, *hi]), *fw)),
            _ => Err(BusError::UnexpectedReply { id, reason: "ping reply must carry 3 bytes" }),
        }
    }

    /// Broadcast ping; returns the ids that answered, in arrival order.
    pub fn scan(&mut self) -> Result<Vec<u8>, BusError> {
        self.send(&InstructionPacket::ping(BROADCAST_ID))?;
        let mut ids = Vec::new();
        loop {
            while let Some(res) = self.decoder.next_packet() {
                if let Ok(Packet::Status(s)) = res {
                    ids.push(s.id);
                }
            }
            match self.transport.receive(self.timeout) {
                Ok(bytes) => self.decoder.push(&bytes),
                Err(BusError::Timeout { .. }) => return Ok(ids),
                Err(e) => return Err(e),
            }
        }
    }

    /// Broadcast writes get no status and return immediately.
    pub fn write(&mut self, id: u8, address: u16, data: &[u8]) -> Result<(), BusError> {
        let p = InstructionPacket::write(id, address, data);
        if id == BROADCAST_ID {
            return self.send(&p);
        }
        self.transact(&p).map(|_| ())
    }

    pub fn read(&mut self, id: u8, address: u16, len: u16) -> Result<Vec<u8>, BusError> {
        let s = self.transact(&InstructionPacket::read(id, address, len))?;
        if s.params.len() != len as usize {
            return Err(BusError::UnexpectedReply { id, reason: "read length mismatch" });
        }
        Ok(s.params)
    }

    pub fn set_torque(&mut self, id: u8, on: bool) -> Result<(), BusError> {
        self.write(id, TORQUE_ENABLE.address, &[on as u8])
    }

    pub fn write_goal_position(&mut self, id: u8, deg: f64) -> Result<(), BusError> {
        let units = deg_to_units(deg)?;
        self.write(id, GOAL_POSITION.address, &units.to_le_bytes())
    }

    pub fn read_present_position_units(&mut self, id: u8) -> Result<u16, BusError> {
        let data = self.read(id, PRESENT_POSITION.address, PRESENT_POSITION.size)?;
        Ok(u16::from_le_bytes([data[0], data[1]]))
    }

    pub fn read_present_position(&mut self, id: u8) -> Result<f64, BusError> {
        let units = self.read_present_position_units(id)?;
        Ok(units_to_deg(units)?)
    }

    /// One SYNC_WRITE of GOAL_POSITION for every `(id, units)` entry.
    pub fn sync_write_goal_units(&mut self, goals: &[(u8, u16)]) -> Result<(), BusError> {
        let mut seen = HashSet::new();
        for (id, _) in goals {
            if !seen.insert(*id) {
                return Err(BusError::DuplicateId(*id));
            }
        }
        let entries: Vec<(u8, Vec<u8>)> = goals
            .iter()
            .map(|(id, u)| (*id, u.to_le_bytes().to_vec()))
            .collect();
        self.send(&InstructionPacket::sync_write(
            GOAL_POSITION.address,
            GOAL_POSITION.size,
            &entries,
        ))
    }

    pub fn sync_write_goals(&mut self, goals: &[(u8, f64)]) -> Result<(), BusError> {
        let units = goals
            .iter()
            .map(|(id, deg)| Ok((*id, deg_to_units(*deg)?)))
            .collect::<Result<Vec<_>, BusError>>()?;
        self.sync_write_goal_units(&units)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::crc::crc16;

    fn bus(ids: &[u8]) -> ServoBus<SimBus> {
        let servos = ids
            .iter()
            .map(|&id| SimServo::new(id, ServoModel::default(), 512).instant());
        ServoBus::new(SimBus::new(servos))
    }

    #[test]
    fn write_goal_sets_register() {
        let mut b = bus(&[1]);
        b.write_goal_position(1, 150.147).unwrap();
        assert_eq!(b.transport().servo(1).unwrap().get(&GOAL_POSITION), 512);
        b.write_goal_position(1, 37.5).unwrap();
        assert_eq!(b.transport().servo(1).unwrap().get(&GOAL_POSITION), 128);
    }

    #[test]
    fn read_after_write_within_quantum() {
        let mut b = bus(&[1]);
        for deg in [0.0, 12.3, 150.147, 299.9] {
            b.write_goal_position(1, deg).unwrap();
            let got = b.read_present_position(1).unwrap();
            assert!((got - deg).abs() <= 300.0 / 1023.0 / 2.0 + 1e-12, "{deg} -> {got}");
        }
    }

    #[test]
    fn absent_id_times_out() {
        let mut b = bus(&[1]);
        assert_eq!(b.write_goal_position(7, 10.0), Err(BusError::Timeout { id: 7 }));
        assert_eq!(b.read_present_position(7), Err(BusError::Timeout { id: 7 }));
    }

    #[test]
    fn write_out_of_range_angle_is_rejected_locally() {
        let mut b = bus(&[1]);
        assert!(matches!(b.write_goal_position(1, 301.0), Err(BusError::Units(_))));
    }

    #[test]
    fn sync_write_updates_all() {
        let mut b = bus(&[1, 2]);
        b.sync_write_goals(&[(1, 150.147), (2, 150.147)]).unwrap();
        b.sync_write_goals(&[(1, 10.0), (2, 20.0)]).unwrap();
        assert_eq!(b.transport().servo(1).unwrap().get(&GOAL_POSITION), 34);
        assert_eq!(b.transport().servo(2).unwrap().get(&GOAL_POSITION), 68);
        b.sync_write_goals(&[(1, 150.147), (2, 150.147)]).unwrap();
        for id in [1, 2] {
            assert_eq!(b.transport().servo(id).unwrap().get(&GOAL_POSITION), 512);
        }
    }

    #[test]
    fn empty_sync_write_is_valid_and_inert() {
        let mut b = bus(&[1, 2]);
        let before: Vec<_> = b.transport().servos().map(|s| *s.registers()).collect();
        b.sync_write_goals(&[]).unwrap();
        let after: Vec<_> = b.transport().servos().map(|s| *s.registers()).collect();
        assert_eq!(before, after);
        assert_eq!(b.transport().dropped_frames(), 0);
    }

    #[test]
    fn sync_write_duplicate_id() {
        let mut b = bus(&[1]);
        assert_eq!(
            b.sync_write_goals(&[(1, 10.0), (1, 20.0)]),
            Err(BusError::DuplicateId(1))
        );
    }

    #[test]
    fn broadcast_ping_answers_in_id_order() {
        let mut sim = SimBus::new([
            SimServo::new(2, ServoModel::default(), 512),
            SimServo::new(1, ServoModel::default(), 512),
        ]);
        let reply = sim.dispatch(&encode_packet(&InstructionPacket::ping(BROADCAST_ID)).unwrap());
        let mut dec = PacketDecoder::new();
        dec.push(&reply);
        let ids: Vec<u8> = std::iter::from_fn(|| dec.next_packet())
            .map(|p| p.unwrap().id())
            .collect();
        assert_eq!(ids, vec![1, 2]);

        let mut b = ServoBus::new(sim);
        assert_eq!(b.scan().unwrap(), vec![1, 2]);
        assert_eq!(b.ping(2).unwrap(), (XL320_MODEL_NUMBER, XL320_FIRMWARE_VERSION));
    }

    #[test]
    fn broadcast_write_has_no_status() {
        let mut sim = SimBus::new([
            SimServo::new(1, ServoModel::default(), 512),
            SimServo::new(2, ServoModel::default(), 512),
        ]);
        let frame = encode_packet(&InstructionPacket::write(BROADCAST_ID, 24, &[1])).unwrap();
        assert!(sim.dispatch(&frame).is_empty());
        assert!(sim.servos().all(|s| s.torque_enabled()));
    }

    #[test]
    fn write_to_read_only_register_reports_error() {
        let mut sim = SimBus::new([SimServo::new(1, ServoModel::default(), 512)]);
        let before = *sim.servo(1).unwrap().registers();
        let frame = encode_packet(&InstructionPacket::write(1, 37, &[0, 0])).unwrap();
        let reply = decode_packet(&sim.dispatch(&frame)).unwrap();
        match reply {
            Packet::Status(s) => assert_eq!(s.error, status_error::ACCESS),
            _ => panic!("expected status"),
        }
        assert_eq!(*sim.servo(1).unwrap().registers(), before);

        let mut b = ServoBus::new(sim);
        assert_eq!(
            b.write(1, 37, &[0, 0]),
            Err(BusError::Status { id: 1, error: status_error::ACCESS })
        );
        assert_eq!(
            b.read(1, 10, 2),
            Err(BusError::Status { id: 1, error: status_error::ACCESS })
        );
        assert_eq!(
            b.write(1, 30, &2000u16.to_le_bytes()),
            Err(BusError::Status { id: 1, error: status_error::DATA_RANGE })
        );
    }

    #[test]
    fn corrupt_frame_is_dropped_and_counted() {
        let mut sim = SimBus::new([SimServo::new(1, ServoModel::default(), 512)]);
        let mut frame = encode_packet(&InstructionPacket::ping(1)).unwrap();
        let n = frame.len();
        frame[n - 1] ^= 0x55;
        assert!(sim.dispatch(&frame).is_empty());
        assert_eq!(sim.dropped_frames(), 1);
    }

    #[test]
    fn servo_moves_only_with_torque() {
        let mut b = ServoBus::new(SimBus::new([SimServo::new(1, ServoModel::default(), 512)]));
        b.write_goal_position(1, 200.0).unwrap();
        b.transport_mut().advance(0.01);
        assert_eq!(b.read_present_position_units(1).unwrap(), 512);
        b.set_torque(1, true).unwrap();
        for _ in 0..100 {
            b.transport_mut().advance(0.01);
        }
        assert_eq!(b.read_present_position_units(1).unwrap(), deg_to_units(200.0).unwrap());
    }

    #[test]
    fn moving_speed_register_caps_slew() {
        let mut b = ServoBus::new(SimBus::new([SimServo::new(1, ServoModel::default(), 0)]));
        b.set_torque(1, true).unwrap();
        b.write(1, MOVING_SPEED.address, &100u16.to_le_bytes()).unwrap();
        b.write_goal_position(1, 300.0).unwrap();
        b.transport_mut().advance(0.1);
        let pos = b.transport().servo(1).unwrap().state().position;
        assert!((pos - 100.0 * SPEED_UNIT_DEG_S * 0.1).abs() < 1e-9);
    }

    #[test]
    fn latency_delays_status() {
        let sim = SimBus::new([SimServo::new(1, ServoModel::default(), 512)]).with_latency(0.005);
        let mut b = ServoBus::new(sim).with_timeout(Duration::from_millis(2));
        assert_eq!(b.ping(1), Err(BusError::Timeout { id: 1 }));
        // the late reply is still consumed on the next transaction
        let mut b = b.with_timeout(Duration::from_millis(10));
        assert!(b.ping(1).is_ok());
    }

    #[test]
    fn loopback_delivers_in_order() {
        let mut t = LoopbackTransport::default();
        t.send(&[1, 2]).unwrap();
        t.send(&[3]).unwrap();
        assert_eq!(t.receive(Duration::ZERO).unwrap(), vec![1, 2]);
        assert_eq!(t.receive(Duration::ZERO).unwrap(), vec![3]);
        assert!(t.receive(Duration::ZERO).is_err());
    }

    #[test]
    fn status_frames_carry_valid_crc() {
        let mut sim = SimBus::new([SimServo::new(1, ServoModel::default(), 512)]);
        let reply = sim.dispatch(&encode_packet(&InstructionPacket::ping(1)).unwrap());
        let n = reply.len();
        assert_eq!(u16::from_le_bytes([reply[n - 2], reply[n - 1]]), crc16(&reply[..n - 2]));
    }
}
