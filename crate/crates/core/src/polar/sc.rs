use super::{bit_reverse, clamp, f_node, g_node, log2_len};
use crate::error::{Error, Result};

/// Successive cancellation decoder with a caller-supplied decision rule.
///
/// `decide(i, llr)` receives the successive LLR of `u_i` given the channel
/// and all earlier decisions, and returns the bit to commit. Frozen bits,
/// genie-aided decoding and randomized rounding are all expressed through
/// that callback.
#[derive(Debug, Clone)]
pub struct ScDecoder {
    len: usize,
    bits: usize,
    llr: Vec<Vec<f64>>,
    part: Vec<Vec<u8>>,
}

impl ScDecoder {
    pub fn new(len: usize) -> Result<Self> {
        let bits = log2_len(len)?;
        Ok(Self {
            len,
            bits,
            llr: (0..=bits).map(|l| vec![0.0; len >> l]).collect(),
            part: (0..=bits).map(|l| vec![0; len >> l]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Runs SC over `llrs` (codeword order) and writes the decisions to `u`.
    pub fn decode<F>(&mut self, llrs: &[f64], u: &mut [u8], mut decide: F) -> Result<()>
    where
        F: FnMut(usize, f64) -> u8,
    {
        if llrs.len() != self.len || u.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: llrs.len().min(u.len()),
            });
        }
        for (k, slot) in self.llr[0].iter_mut().enumerate() {
            *slot = clamp(llrs[bit_reverse(k, self.bits)]);
        }
        self.node(0, 0, u, &mut decide);
        Ok(())
    }

    fn node<F>(&mut self, layer: usize, base: usize, u: &mut [u8], decide: &mut F)
    where
        F: FnMut(usize, f64) -> u8,
    {
        let size = self.len >> layer;
        if size == 1 {
            let b = decide(base, self.llr[layer][0]) & 1;
            u[base] = b;
            self.part[layer][0] = b;
            return;
        }
        let h = size / 2;
        {
            let (upper, lower) = self.llr.split_at_mut(layer + 1);
            let (src, dst) = (&upper[layer], &mut lower[0]);
            for b in 0..h {
                dst[b] = f_node(src[b], src[b + h]);
            }
        }
        self.node(layer + 1, base, u, decide);
        {
            let (upper, lower) = self.part.split_at_mut(layer + 1);
            upper[layer][..h].copy_from_slice(&lower[0][..h]);
        }
        {
            let (upper, lower) = self.llr.split_at_mut(layer + 1);
            let (src, dst) = (&upper[layer], &mut lower[0]);
            let left = &self.part[layer];
            for b in 0..h {
                dst[b] = g_node(src[b], src[b + h], left[b]);
            }
        }
        self.node(layer + 1, base + h, u, decide);
        let (upper, lower) = self.part.split_at_mut(layer + 1);
        let (dst, right) = (&mut upper[layer], &lower[0]);
        for b in 0..h {
            dst[b] ^= right[b];
            dst[b + h] = right[b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{hard_decision, polar_transform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decodes_noiseless_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut dec = ScDecoder::new(256).unwrap();
        for _ in 0..10 {
            let u: Vec<u8> = (0..256).map(|_| rng.gen_range(0..2)).collect();
            let x = polar_transform(&u).unwrap();
            let llrs: Vec<f64> = x
                .iter()
                .map(|b| if *b == 0 { 30.0 } else { -30.0 })
                .collect();
            let mut out = vec![0; 256];
            dec.decode(&llrs, &mut out, |_, l| hard_decision(l))
                .unwrap();
            assert_eq!(out, u);
        }
    }

    #[test]
    fn genie_llrs_match_bruteforce_posterior() {
        // successive LLR of u_i given y and the true prefix, by enumeration
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 8;
        let llrs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let u: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let like = |v: &[u8]| -> f64 {
            let x = polar_transform(v).unwrap();
            x.iter()
                .zip(&llrs)
                .map(|(b, l)| 1.0 / (1.0 + (if *b == 0 { -l } else { *l }).exp()))
                .product()
        };
        let mut seen = vec![0.0; n];
        let mut dec = ScDecoder::new(n).unwrap();
        let mut out = vec![0; n];
        dec.decode(&llrs, &mut out, |i, l| {
            seen[i] = l;
            u[i]
        })
        .unwrap();
        for i in 0..n {
            let mut p = [0.0; 2];
            for tail in 0..(1usize << (n - i)) {
                let mut v = u.clone();
                for k in i..n {
                    v[k] = ((tail >> (k - i)) & 1) as u8;
                }
                p[v[i] as usize] += like(&v);
            }
            assert!((seen[i] - (p[0] / p[1]).ln()).abs() < 1e-9, "i={i}");
        }
    }
}
