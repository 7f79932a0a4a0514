use thiserror::Error;

use crate::hesd::Trajectory;

/// Errors raised by the semiclassical engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A symbol or one of its derivatives evaluated to a non-finite number.
    #[error("non-finite {quantity} of symbol `{symbol}` at coordinate {coordinate}")]
    Evaluation {
        symbol: &'static str,
        quantity: &'static str,
        coordinate: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The norm left the admissible region (σ ≤ 0 or σ unbounded). Carries the
    /// estimated crossing time and the trajectory computed up to that point.
    #[error("validity horizon reached at t = {t}")]
    ValidityHorizonReached {
        t: f64,
        partial: Option<Box<Trajectory>>,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("time {t} outside the span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// The M₃ block of the propagator matrix is singular.
    #[error("focal point at t = {t}")]
    FocalPoint { t: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("numerical blow-up at t = {t}: norm {norm:e} exceeds bound {bound:e}")]
    BlowUp { t: f64, norm: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
