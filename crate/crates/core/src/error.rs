use thiserror::Error;

/// Errors returned by this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("constellation order {0} is not a power of two in [2, 1024]")]
    InvalidOrder(usize),
    #[error("QAM order {0} is not the square of a power of two")]
    NonSquareQam(usize),
    #[error("shaping parameter nu = {0} must be finite and non-negative")]
    InvalidNu(f64),
    #[error("target energy {target} outside the reachable interval (1, {uniform}]")]
    UnreachableEnergy { target: f64, uniform: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("traversal grid is empty (step {0} too large for the feasible interval)")]
    EmptyGrid(f64),
    #[error("root finding did not converge within bracket [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64 },
    #[error("set sizes K+R+D+F = {sum} do not match qN = {total}")]
    SizeMismatch { sum: usize, total: usize },
    #[error("construction infeasible: best leakage {best_leakage} exceeds {threshold}")]
    Infeasible { best_leakage: f64, threshold: f64 },
    #[error("threshold not reachable within search range [{lo}, {hi}] dB")]
    ThresholdUnreachable { lo: f64, hi: f64 },
    #[error("merging disabled would exceed the output alphabet guard ({0} classes)")]
    AlphabetExplosion(usize),
    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
