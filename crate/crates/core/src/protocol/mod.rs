//! Dynamixel Protocol 2.0 codec, XL-320 control table and servo bus.

pub mod bus;
pub mod control_table;
pub mod crc;
pub mod packet;

pub use bus::{BusError, BusTransport, LoopbackTransport, ServoBus, SimBus, SimServo};
pub use control_table::{deg_to_units, neutral_deg, units_to_deg, UnitsError};
pub use crc::crc16;
pub use packet::{
    decode_packet, destuff, encode, encode_packet, encode_status, stuff, DecodeError, EncodeError,
    Instruction, InstructionPacket, Packet, PacketDecoder, StatusPacket, BROADCAST_ID,
};
