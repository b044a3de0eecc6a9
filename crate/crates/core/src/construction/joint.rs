use crate::error::{Error, Result};

/// Joint pmf of a binary `T` and a finite `V`, stored as `p[v] = [P(0,v), P(1,v)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    p: Vec<[f64; 2]>,
}

impl DiscreteJoint {
    pub fn new(p: Vec<[f64; 2]>) -> Result<Self> {
        let s: f64 = p.iter().map(|e| e[0] + e[1]).sum();
        if p.iter().flatten().any(|x| !(*x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "joint pmf must be non-negative and sum to 1".into(),
            ));
        }
        Ok(Self { p })
    }

    /// Builds from unnormalized weights.
    pub fn from_weights(w: Vec<[f64; 2]>) -> Result<Self> {
        let s: f64 = w.iter().map(|e| e[0] + e[1]).sum();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Self::new(w.into_iter().map(|e| [e[0] / s, e[1] / s]).collect())
    }

    pub fn entries(&self) -> &[[f64; 2]] {
        &self.p
    }

    /// `H(T | V)` in bits.
    pub fn conditional_entropy(&self) -> f64 {
        self.p
            .iter()
            .map(|e| {
                let s = e[0] + e[1];
                if s > 0.0 {
                    s * crate::binary_entropy(e[0] / s)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Bhattacharyya parameter `Z(T|V) = 2 sum_v sqrt(P(0,v) P(1,v))`.
pub fn zb_parameter(j: &DiscreteJoint) -> f64 {
    (2.0 * j.p.iter().map(|e| (e[0] * e[1]).sqrt()).sum::<f64>()).min(1.0)
}
