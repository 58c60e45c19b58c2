use thiserror::Error;

/// Errors raised by the engine and the controller constructions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state {0}")]
    NonFiniteState(String),

    #[error("state at t = {t}, j = {j} lies in neither the flow set (indicator {flow}) nor the jump set (indicator {jump})")]
    CoverageViolation {
        t: f64,
        j: usize,
        flow: f64,
        jump: f64,
    },

    #[error("indicator does not change sign between the two states ({start} -> {end})")]
    NoSignChange { start: f64, end: f64 },

    #[error("jump map returned no candidates")]
    EmptyJumpSet,

    #[error("state is not in the jump set (indicator {indicator})")]
    NotInJumpSet { indicator: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid quadruple: {0}")]
    InvalidQuadruple(String),

    #[error("parameter {param} violates bound: {bound}")]
    ParamBoundViolation { param: &'static str, bound: String },

    #[error("barrier evaluated at non-positive distance {0}")]
    NonPositiveDistance(f64),

    #[error("point is outside the free space (distance to obstacle {distance}, margin {epsilon})")]
    OutsideFreeSpace { distance: f64, epsilon: f64 },

    #[error("no critical point bracketed on the ray behind the obstacle: {0}")]
    NoRootBracketed(String),

    #[error("invalid navigation world: {0}")]
    InvalidWorld(String),

    #[error("gain validation failed for {param}: {reason}")]
    GainValidation { param: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
