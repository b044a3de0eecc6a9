//! CRC-8 with polynomial `x^8 + x^2 + x + 1` (0x07), zero init, no
//! reflection, bits processed in order.

pub const CRC_LEN: usize = 8;
const POLY: u8 = 0x07;

/// CRC register after shifting in `bits`.
pub fn crc8(bits: &[u8]) -> u8 {
    bits.iter().fold(0u8, |crc, &b| {
        let feedback = (crc >> 7) ^ (b & 1);
        let shifted = crc << 1;
        if feedback == 1 {
            shifted ^ POLY
        } else {
            shifted
        }
    })
}

/// `msg` followed by its 8 CRC bits, most significant first.
pub fn crc8_attach(msg: &[u8]) -> Vec<u8> {
    let crc = crc8(msg);
    let mut out = msg.to_vec();
    out.extend((0..CRC_LEN).rev().map(|k| (crc >> k) & 1));
    out
}

/// Whether the trailing 8 bits are the CRC of the rest.
pub fn crc8_check(bits: &[u8]) -> bool {
    bits.len() >= CRC_LEN && crc8(bits) == 0
}
