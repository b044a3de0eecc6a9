//! Binary polar codes: the transform `x = u B_N F^{(x)n}`, successive
//! cancellation (SC) and list (SCL) decoding over LLRs, and the CRC-8 outer
//! code.
//!
//! LLRs are `ln P(0)/P(1)`, so a positive value favours bit 0. Decoders take
//! channel LLRs in codeword order and return decisions in `u` order.

mod crc;
mod list;
mod sc;

pub use crc::{crc8, crc8_attach, crc8_check, CRC_LEN};
pub use list::{ListDecoder, ListRoot, Role, Survivor};
pub use sc::ScDecoder;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const LLR_CLAMP: f64 = 60.0;

/// `log2 N`, or an error if `n` is not a power of two.
pub fn log2_len(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Reverses the low `bits` bits of `i`.
pub fn bit_reverse(i: usize, bits: usize) -> usize {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS as usize - bits)
    }
}

/// `v F^{(x)n}` in place, with `F = [[1,0],[1,1]]`.
pub(crate) fn kernel_in_place(v: &mut [u8]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        h *= 2;
    }
}

/// Polar transform `x = u B_N F^{(x)n}` over GF(2). It is an involution.
pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    let bits = log2_len(u.len())?;
    let mut v = u.to_vec();
    kernel_in_place(&mut v);
    Ok((0..u.len()).map(|k| v[bit_reverse(k, bits)]).collect())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Path-metric increment `-ln P(u)` for a bit with LLR `llr`.
#[inline]
pub fn decision_penalty(llr: f64, bit: u8) -> f64 {
    if bit == 0 {
        softplus(-llr)
    } else {
        softplus(llr)
    }
}

/// Hard decision, ties to 0.
#[inline]
pub fn hard_decision(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

#[inline]
pub(crate) fn clamp(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Check-node update `2 atanh(tanh(a/2) tanh(b/2))` in its exact
/// min-plus-correction form.
#[inline]
pub(crate) fn f_node(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    let s = if (a < 0.0) != (b < 0.0) { -m } else { m };
    let c1 = (a + b).abs();
    let c2 = (a - b).abs();
    if c2 > 36.0 {
        clamp(s + (-c1).exp().ln_1p())
    } else {
        clamp(s + (-c1).exp().ln_1p() - (-c2).exp().ln_1p())
    }
}

/// Variable-node update given the partial sum `u` of the upper branch.
#[inline]
pub(crate) fn g_node(a: f64, b: f64, u: u8) -> f64 {
    clamp(if u == 0 { b + a } else { b - a })
}

/// Input to [`scl_decode`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeInput {
    /// Channel LLRs in codeword order.
    pub channel_llrs: Vec<f64>,
    /// Source LLRs, added to the channel LLRs when present.
    pub prior_llrs: Option<Vec<f64>>,
    /// `Some(v)` fixes `u_i = v`.
    pub known_positions: Vec<Option<u8>>,
    pub list_size: usize,
    /// The last [`CRC_LEN`] free positions carry a CRC-8 of the others.
    pub crc_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutput {
    pub u_hat: Vec<u8>,
    pub x_hat: Vec<u8>,
    pub path_metrics: Vec<f64>,
    /// Survivors `(u, metric)` sorted by metric.
    pub survivor_list: Vec<(Vec<u8>, f64)>,
    /// False when the CRC is enabled and no survivor passes it.
    pub success: bool,
}

/// Free-position bits of `u` in index order.
pub fn free_bits(u: &[u8], known: &[Option<u8>]) -> Vec<u8> {
    u.iter()
        .zip(known)
        .filter(|(_, k)| k.is_none())
        .map(|(b, _)| *b)
        .collect()
}

/// SCL decoding of a single polar code.
pub fn scl_decode(input: &DecodeInput) -> Result<DecodeOutput> {
    let n = input.channel_llrs.len();
    log2_len(n)?;
    if input.known_positions.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: input.known_positions.len(),
        });
    }
    let mut llrs = input.channel_llrs.clone();
    if let Some(p) = &input.prior_llrs {
        if p.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: p.len(),
            });
        }
        for (a, b) in llrs.iter_mut().zip(p) {
            *a += b;
        }
    }
    let roles: Vec<Role> = input
        .known_positions
        .iter()
        .map(|k| k.map_or(Role::Free, Role::Fixed))
        .collect();
    let mut dec = ListDecoder::new(n, input.list_size.max(1))?;
    let survivors = dec.run(&[ListRoot { llrs, metric: 0.0 }], &roles, None)?;
    let pick = if input.crc_enabled {
        survivors
            .iter()
            .position(|s| crc8_check(&free_bits(&s.u, &input.known_positions)))
    } else {
        Some(0)
    };
    let success = pick.is_some();
    let best = &survivors[pick.unwrap_or(0)];
    Ok(DecodeOutput {
        u_hat: best.u.clone(),
        x_hat: polar_transform(&best.u)?,
        path_metrics: survivors.iter().map(|s| s.metric).collect(),
        survivor_list: survivors.iter().map(|s| (s.u.clone(), s.metric)).collect(),
        success,
    })
}
