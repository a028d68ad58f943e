//! Error type shared by every module.

use thiserror::Error;

/// Failures raised while designing, transforming or verifying a chain.
///
/// Each variant maps to a stable machine-readable code via [`CradleError::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CradleError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("k0 + k1 must be odd (got k0 = {k0}, k1 = {k1})")]
    SameParity { k0: i64, k1: i64 },
    #[error("k0 and k1 share the common factor {factor}")]
    CommonFactor { k0: i64, k1: i64, factor: i64 },
    #[error("eigeninteger recurrence overflows 64-bit integers at n = {n}")]
    IntegerOverflow { n: usize },
    #[error("size N = {n} exceeds the conditioning cap {cap}")]
    SizeCap { n: usize, cap: usize },
    #[error("conditioning failure: {0}")]
    Conditioning(String),
    #[error("positivity failure: {0}")]
    Positivity(String),
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("single interior point x_{k} cannot be removed (only k = 0 or k = N keeps weights positive)")]
    InteriorSurgery { k: usize },
    #[error("surgery failure: {0}")]
    Surgery(String),
    #[error("synthesis failure: {0}")]
    Synthesis(String),
    #[error("revival order Z = {z} is not in the schedule")]
    UnknownRevivalOrder { z: u64 },
    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
}

impl CradleError {
    /// Stable diagnostic code used in reports and CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            CradleError::InvalidDesign(_) => "E_DESIGN",
            CradleError::SameParity { .. } => "E_PARITY",
            CradleError::CommonFactor { .. } => "E_COMMON_FACTOR",
            CradleError::IntegerOverflow { .. } => "E_OVERFLOW",
            CradleError::SizeCap { .. } => "E_SIZE_CAP",
            CradleError::Conditioning(_) => "E_CONDITIONING",
            CradleError::Positivity(_) => "E_POSITIVITY",
            CradleError::AlphaOutOfRange(_) => "E_ALPHA_RANGE",
            CradleError::InteriorSurgery { .. } => "E_INTERIOR_SURGERY",
            CradleError::Surgery(_) => "E_SURGERY",
            CradleError::Synthesis(_) => "E_SYNTHESIS",
            CradleError::UnknownRevivalOrder { .. } => "E_REVIVAL_ORDER",
            CradleError::NoConvergence { .. } => "E_NO_CONVERGENCE",
            CradleError::StepTooLarge { .. } => "E_STEP",
        }
    }
}

pub type Result<T> = std::result::Result<T, CradleError>;
