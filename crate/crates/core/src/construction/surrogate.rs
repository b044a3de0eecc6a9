//! Symmetrized binary channels seen by one label level.
//!
//! For a level bit `T = b^l` observed through `V` (the lower label bits,
//! optionally with the channel output), the posterior LLR `L` of `T` given
//! `V` defines a symmetric channel whose output, given input 0, is
//! distributed as `(1 - 2T) L`. It has the same conditional entropy and MAP
//! error rate as estimating `T` from `V`, and polarizes the same way, so the
//! symmetric-channel machinery applies to shaped levels.

use crate::constellation::Scheme;
use crate::constellation::ShapedDistribution;
use crate::db_to_linear;
use crate::error::Result;

use super::bms::{crossover_from_llr, BscMixture};

/// One real dimension of the constellation with its marginal pmf.
struct Dimension {
    amps: Vec<f64>,
    pmf: Vec<f64>,
}

/// The real dimension carrying `level`, and the level index inside it.
fn dimension_of(dist: &ShapedDistribution, level: usize) -> (Dimension, usize) {
    let c = dist.constellation();
    match c.scheme() {
        Scheme::Ask => (
            Dimension {
                amps: c.points().iter().map(|p| p.re).collect(),
                pmf: dist.pmf().to_vec(),
            },
            level,
        ),
        Scheme::Qam => {
            // even label bits index the in-phase amplitude, odd ones quadrature
            let half = c.bits() / 2;
            let side = 1usize << half;
            let axis = level % 2;
            let mut pmf = vec![0.0; side];
            let mut amps = vec![0.0; side];
            for (label, (p, x)) in dist.pmf().iter().zip(c.points()).enumerate() {
                let mut idx = 0;
                for k in 0..half {
                    idx |= ((label >> (2 * k + axis)) & 1) << k;
                }
                pmf[idx] += p;
                amps[idx] = if axis == 0 { x.re } else { x.im };
            }
            (Dimension { amps, pmf }, level / 2)
        }
    }
}

fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Channel from the level bit to the lower label bits only.
pub fn source_channel(dist: &ShapedDistribution, level: usize) -> Result<BscMixture> {
    let (dim, sub) = dimension_of(dist, level);
    let mask = (1usize << sub) - 1;
    let mut comps = Vec::new();
    for lower in 0..(1usize << sub) {
        let (mut p0, mut p1) = (0.0, 0.0);
        for (k, p) in dim.pmf.iter().enumerate() {
            if k & mask == lower {
                if (k >> sub) & 1 == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
        }
        if p0 + p1 > 0.0 {
            comps.push((p0 + p1, p0.min(p1) / (p0 + p1)));
        }
    }
    BscMixture::new(comps)
}

const GRID_HALF_WIDTH: f64 = 10.0;
const GRID_POINTS: usize = 2001;

/// Channel from the level bit to the lower label bits and the AWGN output at
/// `snr_db` (`sigma^2 = P / SNR`, complex noise), integrated on a fine grid.
pub fn awgn_level_channel(
    dist: &ShapedDistribution,
    delta: f64,
    snr_db: f64,
    level: usize,
) -> Result<BscMixture> {
    if snr_db == f64::NEG_INFINITY {
        return source_channel(dist, level);
    }
    let (dim, sub) = dimension_of(dist, level);
    let power = delta * delta * dist.energy();
    let sigma2 = power / db_to_linear(snr_db);
    let mask = (1usize << sub) - 1;
    let ln_p: Vec<f64> = dim.pmf.iter().map(|p| p.ln()).collect();
    let mut comps = Vec::with_capacity(dim.amps.len() * GRID_POINTS);
    if !(sigma2 > 0.0) {
        comps.extend(dim.pmf.iter().map(|p| (*p, 0.0)));
        return BscMixture::new(comps);
    }
    let s = (sigma2 / 2.0).sqrt();
    let h = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let weights: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|j| {
            let t = -GRID_HALF_WIDTH + j as f64 * h;
            let simpson = if j == 0 || j == GRID_POINTS - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t * s, simpson * (-0.5 * t * t).exp())
        })
        .collect();
    let wsum: f64 = weights.iter().map(|w| w.1).sum();
    for (x, &px) in dim.pmf.iter().enumerate() {
        if px <= 1e-300 {
            continue;
        }
        let lower = x & mask;
        let bit = (x >> sub) & 1;
        for &(n, wt) in &weights {
            let y = delta * dim.amps[x] + n;
            let (mut a0, mut a1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (k, &amp) in dim.amps.iter().enumerate() {
                if k & mask != lower || dim.pmf[k] <= 0.0 {
                    continue;
                }
                let d = y - delta * amp;
                let m = ln_p[k] - d * d / sigma2;
                if (k >> sub) & 1 == 0 {
                    a0 = lse(a0, m);
                } else {
                    a1 = lse(a1, m);
                }
            }
            let llr = if a0 == a1 { 0.0 } else { a0 - a1 };
            let signed = if bit == 0 { llr } else { -llr };
            comps.push((px * wt / wsum, crossover_from_llr(signed)));
        }
    }
    BscMixture::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{fit_delta_distribution, Constellation};
    use crate::secrecy::mutual_information;

    fn ask(q: usize) -> Constellation {
        Constellation::new(q, Scheme::Ask).unwrap()
    }

    #[test]
    fn source_entropy_chain_rule() {
        // sum over levels of H(b^l | lower) is H(X)
        for (c, delta) in [
            (ask(8), 0.3),
            (Constellation::new(16, Scheme::Qam).unwrap(), 0.45),
        ] {
            let d = fit_delta_distribution(&c, delta, 1.0).unwrap();
            let total: f64 = (0..c.bits())
                .map(|l| source_channel(&d, l).unwrap().entropy())
                .sum();
            assert!(
                (total - d.entropy()).abs() < 1e-9,
                "{total} vs {}",
                d.entropy()
            );
        }
    }

    #[test]
    fn level_channels_sum_to_mutual_information() {
        // H(X) - sum_l H(b^l | lower, Y) = I(X; Y)
        let c = ask(8);
        let d = fit_delta_distribution(&c, 0.3, 1.0).unwrap();
        for snr in [0.0, 8.0, 13.0] {
            let cond: f64 = (0..3)
                .map(|l| awgn_level_channel(&d, 0.3, snr, l).unwrap().entropy())
                .sum();
            let mi = mutual_information(&d, snr).unwrap();
            assert!(
                (d.entropy() - cond - mi).abs() < 1e-6,
                "snr {snr}: {} vs {mi}",
                d.entropy() - cond
            );
        }
    }

    #[test]
    fn qam_levels_reduce_to_dimensions() {
        let c = Constellation::new(16, Scheme::Qam).unwrap();
        let d = fit_delta_distribution(&c, 0.45, 1.0).unwrap();
        let cond: f64 = (0..4)
            .map(|l| awgn_level_channel(&d, 0.45, 10.0, l).unwrap().entropy())
            .sum();
        let mi = mutual_information(&d, 10.0).unwrap();
        assert!((d.entropy() - cond - mi).abs() < 1e-6);
    }

    #[test]
    fn extremes() {
        let d = fit_delta_distribution(&ask(4), 0.5, 1.0).unwrap();
        let perfect = awgn_level_channel(&d, 0.5, f64::INFINITY, 1).unwrap();
        assert_eq!(perfect.entropy(), 0.0);
        let blind = awgn_level_channel(&d, 0.5, f64::NEG_INFINITY, 1).unwrap();
        assert_eq!(blind, source_channel(&d, 1).unwrap());
    }
}
