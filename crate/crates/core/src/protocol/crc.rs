//! CRC-16 as used by Dynamixel Protocol 2.0 (poly 0x8005, init 0, no
//! reflection, no final xor). Also known as CRC-16/BUYPASS.

const POLY: u16 = 0x8005;

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            c = if c & 0x8000 != 0 { (c << 1) ^ POLY } else { c << 1 };
            bit += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static TABLE: [u16; 256] = build_table();

pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(0u16, |crc, &b| {
        let idx = ((crc >> 8) ^ b as u16) & 0xFF;
        (crc << 8) ^ TABLE[idx as usize]
    })
}
