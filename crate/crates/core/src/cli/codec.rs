use std::io::Write;

use clap::{Args, Subcommand, ValueEnum};

use super::CliError;
use crate::protocol::{decode_packet, encode_packet, InstructionPacket};

#[derive(Debug, Args)]
pub struct CodecArgs {
    #[command(subcommand)]
    pub command: CodecCommand,
}

#[derive(Debug, Subcommand)]
pub enum CodecCommand {
    /// Build an instruction frame and print it as hex.
    Encode {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        instr: InstrArg,
        /// Control-table address (write, read).
        #[arg(long)]
        addr: Option<u16>,
        /// Register bytes as hex (write).
        #[arg(long)]
        data: Option<String>,
        /// Bytes to read (read).
        #[arg(long, default_value_t = 2)]
        len: u16,
    },
    /// Parse a hex frame and print its fields.
    Decode {
        /// Frame bytes; whitespace is ignored.
        #[arg(num_args = 1.., required = true)]
        hex: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstrArg {
    Ping,
    Read,
    Write,
}

/// Lowercase hex in groups of two bytes: `ffff fd00 0103 ...`.
pub fn format_hex(bytes: &[u8]) -> String {
    bytes
        .chunks(2)
        .map(|c| c.iter().map(|b| format!("{b:02x}")).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Accepts any mix of whitespace, optional `0x` prefixes and either case.
pub fn parse_hex(s: &str) -> Result<Vec<u8>, String> {
    let digits: String = s
        .split_whitespace()
        .map(|t| t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t))
        .collect();
    if !digits.len().is_multiple_of(2) {
        return Err(format!("odd number of hex digits ({})", digits.len()));
    }
    (0..digits.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&digits[i..i + 2], 16)
                .map_err(|_| format!("invalid hex byte {:?}", &digits[i..i + 2]))
        })
        .collect()
}

pub fn cmd_codec<W: Write>(args: &CodecArgs, out: &mut W) -> Result<(), CliError> {
    match &args.command {
        CodecCommand::Encode { id, instr, addr, data, len } => {
            let need_addr = || addr.ok_or_else(|| CliError::Usage("--addr is required for read and write".into()));
            let packet = match instr {
                InstrArg::Ping => InstructionPacket::ping(*id),
                InstrArg::Read => InstructionPacket::read(*id, need_addr()?, *len),
                InstrArg::Write => {
                    let data = data
                        .as_deref()
                        .ok_or_else(|| CliError::Usage("--data is required for write".into()))?;
                    let bytes = parse_hex(data).map_err(CliError::Usage)?;
                    InstructionPacket::write(*id, need_addr()?, &bytes)
                }
            };
            let frame = encode_packet(&packet).map_err(|e| CliError::Usage(e.to_string()))?;
            writeln!(out, "{}", format_hex(&frame))?;
        }
        CodecCommand::Decode { hex } => {
            let bytes = parse_hex(&hex.join(" ")).map_err(CliError::Usage)?;
            let packet = decode_packet(&bytes).map_err(|e| CliError::Usage(format!("decode failed: {e}")))?;
            writeln!(out, "{packet}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_grouping() {
        let b = [0xff, 0xff, 0xfd, 0x00, 0x01, 0x03, 0x00, 0x01, 0x19, 0x4e];
        assert_eq!(format_hex(&b), "ffff fd00 0103 0001 194e");
        assert_eq!(format_hex(&[0xab]), "ab");
    }

    #[test]
    fn hex_parsing() {
        assert_eq!(parse_hex("FFFF fd00\n01").unwrap(), vec![0xff, 0xff, 0xfd, 0x00, 0x01]);
        assert_eq!(parse_hex("0x1e 0X00").unwrap(), vec![0x1e, 0x00]);
        assert!(parse_hex("abc").is_err());
        assert!(parse_hex("zz").is_err());
        assert_eq!(parse_hex("").unwrap(), Vec::<u8>::new());
    }
}
