//! Protocol 2.0 framing.
//!
//! ```text
//! FF FF FD 00 | ID | LEN_L LEN_H | INST | PARAMS... | CRC_L CRC_H
//! ```
//!
//! `LEN` counts the instruction byte, the (stuffed) parameters and the CRC.
//! Status frames carry instruction `0x55` followed by the error byte.

use std::fmt;

use thiserror::Error;

use super::crc::crc16;

pub const HEADER: [u8; 4] = [0xFF, 0xFF, 0xFD, 0x00];
pub const BROADCAST_ID: u8 = 0xFE;
pub const MAX_ID: u8 = 0xFC;
pub const STATUS_INSTRUCTION: u8 = 0x55;
/// Largest stuffed parameter block that still fits the 16-bit length field.
pub const MAX_PARAMS: usize = 65532;

const PATTERN: [u8; 3] = [0xFF, 0xFF, 0xFD];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Ping,
    Read,
    Write,
    SyncWrite,
}

impl Instruction {
    pub fn code(self) -> u8 {
        match self {
            Instruction::Ping => 0x01,
            Instruction::Read => 0x02,
            Instruction::Write => 0x03,
            Instruction::SyncWrite => 0x83,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x01 => Some(Instruction::Ping),
            0x02 => Some(Instruction::Read),
            0x03 => Some(Instruction::Write),
            0x83 => Some(Instruction::SyncWrite),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Instruction::Ping => "PING",
            Instruction::Read => "READ",
            Instruction::Write => "WRITE",
            Instruction::SyncWrite => "SYNC_WRITE",
        }
    }
}

impl std::str::FromStr for Instruction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ping" => Ok(Instruction::Ping),
            "read" => Ok(Instruction::Read),
            "write" => Ok(Instruction::Write),
            "sync_write" | "sync-write" => Ok(Instruction::SyncWrite),
            other => Err(format!("unknown instruction '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionPacket {
    pub id: u8,
    pub instruction: Instruction,
    pub params: Vec<u8>,
}

impl InstructionPacket {
    pub fn new(id: u8, instruction: Instruction, params: Vec<u8>) -> Self {
        Self { id, instruction, params }
    }

    pub fn ping(id: u8) -> Self {
        Self::new(id, Instruction::Ping, Vec::new())
    }

    pub fn read(id: u8, addr: u16, len: u16) -> Self {
        let mut params = addr.to_le_bytes().to_vec();
        params.extend_from_slice(&len.to_le_bytes());
        Self::new(id, Instruction::Read, params)
    }

    pub fn write(id: u8, addr: u16, data: &[u8]) -> Self {
        let mut params = addr.to_le_bytes().to_vec();
        params.extend_from_slice(data);
        Self::new(id, Instruction::Write, params)
    }

    /// All entries must carry `data_len` bytes.
    pub fn sync_write(addr: u16, data_len: u16, entries: &[(u8, Vec<u8>)]) -> Self {
        let mut params = addr.to_le_bytes().to_vec();
        params.extend_from_slice(&data_len.to_le_bytes());
        for (id, data) in entries {
            params.push(*id);
            params.extend_from_slice(data);
        }
        Self::new(BROADCAST_ID, Instruction::SyncWrite, params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusPacket {
    pub id: u8,
    pub error: u8,
    pub params: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Instruction(InstructionPacket),
    Status(StatusPacket),
}

impl Packet {
    pub fn id(&self) -> u8 {
        match self {
            Packet::Instruction(p) => p.id,
            Packet::Status(p) => p.id,
        }
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Packet::Instruction(p) => {
                write!(f, "instruction packet\n  id:          {}", p.id)?;
                if p.id == BROADCAST_ID {
                    write!(f, " (broadcast)")?;
                }
                write!(
                    f,
                    "\n  instruction: {} (0x{:02x})\n  params:      [{}]",
                    p.instruction.name(),
                    p.instruction.code(),
                    hex_bytes(&p.params)
                )?;
                if matches!(p.instruction, Instruction::Read | Instruction::Write)
                    && p.params.len() >= 2
                {
                    let addr = u16::from_le_bytes([p.params[0], p.params[1]]);
                    write!(f, "\n  address:     {addr}")?;
                    if p.instruction == Instruction::Read && p.params.len() >= 4 {
                        let len = u16::from_le_bytes([p.params[2], p.params[3]]);
                        write!(f, "\n  length:      {len}")?;
                    } else {
                        write!(f, "\n  data:        [{}]", hex_bytes(&p.params[2..]))?;
                    }
                }
                Ok(())
            }
            Packet::Status(p) => write!(
                f,
                "status packet\n  id:          {}\n  error:       0x{:02x}\n  params:      [{}]",
                p.id,
                p.error,
                hex_bytes(&p.params)
            ),
        }
    }
}

fn hex_bytes(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("invalid id {0}: must be 0-252 or 254")]
    InvalidId(u8),
    #[error("parameter block too long: {0} bytes after stuffing (max {MAX_PARAMS})")]
    ParamsTooLong(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad header: {field} is 0x{found:02x}, expected 0x{expected:02x}")]
    BadHeader {
        field: &'static str,
        expected: u8,
        found: u8,
    },
    #[error("length mismatch: {field} declares {declared} bytes, frame has {actual}")]
    LengthMismatch {
        field: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("crc mismatch: frame carries 0x{received:04x}, computed 0x{computed:04x}")]
    CrcMismatch { received: u16, computed: u16 },
    #[error("truncated frame: {needed} more byte(s) needed")]
    TruncatedFrame { needed: usize },
    #[error("malformed byte stuffing at parameter offset {offset}")]
    Framing { offset: usize },
    #[error("unknown instruction 0x{0:02x}")]
    UnknownInstruction(u8),
}

/// Insert `FD` after every `FF FF FD` run inside a parameter block.
pub fn stuff(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + payload.len() / 3);
    for &b in payload {
        out.push(b);
        if out.ends_with(&PATTERN) {
            out.push(0xFD);
        }
    }
    out
}

/// Remove stuffing. A pattern not followed by the stuffing `FD` cannot occur
/// in a well-formed stream.
pub fn destuff(bytes: &[u8]) -> Result<Vec<u8>, DecodeError> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        out.push(bytes[i]);
        if out.ends_with(&PATTERN) {
            match bytes.get(i + 1) {
                Some(0xFD) => i += 1,
                _ => return Err(DecodeError::Framing { offset: i }),
            }
        }
        i += 1;
    }
    Ok(out)
}

fn finish_frame(id: u8, inst: u8, body: &[u8]) -> Result<Vec<u8>, EncodeError> {
    let stuffed = stuff(body);
    if stuffed.len() > MAX_PARAMS {
        return Err(EncodeError::ParamsTooLong(stuffed.len()));
    }
    let len = (stuffed.len() + 3) as u16;
    let mut frame = Vec::with_capacity(stuffed.len() + 10);
    frame.extend_from_slice(&HEADER);
    frame.push(id);
    frame.extend_from_slice(&len.to_le_bytes());
    frame.push(inst);
    frame.extend_from_slice(&stuffed);
    let crc = crc16(&frame);
    frame.extend_from_slice(&crc.to_le_bytes());
    Ok(frame)
}

fn check_id(id: u8) -> Result<(), EncodeError> {
    if id <= MAX_ID || id == BROADCAST_ID {
        Ok(())
    } else {
        Err(EncodeError::InvalidId(id))
    }
}

pub fn encode_packet(p: &InstructionPacket) -> Result<Vec<u8>, EncodeError> {
    check_id(p.id)?;
    finish_frame(p.id, p.instruction.code(), &p.params)
}

pub fn encode_status(p: &StatusPacket) -> Result<Vec<u8>, EncodeError> {
    if p.id > MAX_ID {
        return Err(EncodeError::InvalidId(p.id));
    }
    let mut body = Vec::with_capacity(p.params.len() + 1);
    body.push(p.error);
    body.extend_from_slice(&p.params);
    finish_frame(p.id, STATUS_INSTRUCTION, &body)
}

pub fn encode(p: &Packet) -> Result<Vec<u8>, EncodeError> {
    match p {
        Packet::Instruction(p) => encode_packet(p),
        Packet::Status(p) => encode_status(p),
    }
}

/// Total frame length once the length field is known, or the number of
/// bytes still missing before it can be read.
fn frame_len(bytes: &[u8]) -> Result<usize, DecodeError> {
    for (i, (&want, name)) in HEADER
        .iter()
        .zip(["header[0]", "header[1]", "header[2]", "reserved"])
        .enumerate()
    {
        match bytes.get(i) {
            None => {
                return Err(DecodeError::TruncatedFrame {
                    needed: 7 - bytes.len(),
                })
            }
            Some(&b) if b != want => {
                return Err(DecodeError::BadHeader {
                    field: name,
                    expected: want,
                    found: b,
                })
            }
            Some(_) => {}
        }
    }
    if bytes.len() < 7 {
        return Err(DecodeError::TruncatedFrame {
            needed: 7 - bytes.len(),
        });
    }
    let declared = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    if declared < 3 {
        return Err(DecodeError::LengthMismatch {
            field: "length",
            declared,
            actual: 3,
        });
    }
    Ok(7 + declared)
}

/// Decode exactly one frame occupying all of `bytes`.
pub fn decode_packet(bytes: &[u8]) -> Result<Packet, DecodeError> {
    let total = frame_len(bytes)?;
    if bytes.len() < total {
        return Err(DecodeError::TruncatedFrame {
            needed: total - bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(DecodeError::LengthMismatch {
            field: "length",
            declared: total - 7,
            actual: bytes.len() - 7,
        });
    }
    decode_complete(&bytes[..total])
}

fn decode_complete(frame: &[u8]) -> Result<Packet, DecodeError> {
    let n = frame.len();
    let received = u16::from_le_bytes([frame[n - 2], frame[n - 1]]);
    let computed = crc16(&frame[..n - 2]);
    if received != computed {
        return Err(DecodeError::CrcMismatch { received, computed });
    }
    let id = frame[4];
    let inst = frame[7];
    let body = destuff(&frame[8..n - 2])?;
    if inst == STATUS_INSTRUCTION {
        let Some((&error, params)) = body.split_first() else {
            return Err(DecodeError::LengthMismatch {
                field: "status error byte",
                declared: 4,
                actual: 3,
            });
        };
        return Ok(Packet::Status(StatusPacket {
            id,
            error,
            params: params.to_vec(),
        }));
    }
    let instruction = Instruction::from_code(inst).ok_or(DecodeError::UnknownInstruction(inst))?;
    Ok(Packet::Instruction(InstructionPacket {
        id,
        instruction,
        params: body,
    }))
}

/// Incremental frame decoder for byte streams. Garbage before a header is
/// skipped; a corrupt frame is reported once and scanning resumes one byte
/// past its header.
#[derive(Debug, Default)]
pub struct PacketDecoder {
    buf: Vec<u8>,
    discarded: usize,
}

impl PacketDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes dropped while hunting for a header or skipping corrupt frames.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// `None` when more input is needed.
    pub fn next_packet(&mut self) -> Option<Result<Packet, DecodeError>> {
        let start = find_header(&self.buf);
        if start > 0 {
            self.drop_front(start);
        }
        if self.buf.len() < 7 {
            return None;
        }
        match frame_len(&self.buf) {
            Ok(total) if self.buf.len() < total => None,
            Ok(total) => {
                let res = decode_complete(&self.buf[..total]);
                if res.is_ok() {
                    self.buf.drain(..total);
                } else {
                    self.drop_front(1);
                }
                Some(res)
            }
            Err(DecodeError::TruncatedFrame { .. }) => None,
            Err(e) => {
                self.drop_front(1);
                Some(Err(e))
            }
        }
    }

    fn drop_front(&mut self, n: usize) {
        self.buf.drain(..n);
        self.discarded += n;
    }
}

/// Index of the first possible header start; a trailing partial header is
/// kept.
fn find_header(buf: &[u8]) -> usize {
    (0..buf.len())
        .find(|&i| {
            let tail = &buf[i..];
            let k = tail.len().min(HEADER.len());
            tail[..k] == HEADER[..k]
        })
        .unwrap_or(buf.len())
}
