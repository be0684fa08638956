use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidDimension(usize),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    SlotOutOfRange {
        slot: usize,
        slots: usize,
    },
    InvalidParameter(String),
    InvalidState(String),
    NotHermitian(f64),
    /// A dispersive detuning vanished.
    Resonance(String),
    Unnormalized(f64),
    IntegrationFailure {
        t: f64,
        step: f64,
        steps: usize,
    },
    NonUniqueSteadyState(f64),
    SteadyStateResidual(f64),
    CalibrationFailure(String),
    FitFailure {
        iterations: usize,
        cost: f64,
    },
    NoRoot(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension(d) => write!(f, "invalid dimension {d} (must be >= 2)"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SlotOutOfRange { slot, slots } => {
                write!(f, "subsystem slot {slot} out of range (space has {slots})")
            }
            Error::InvalidParameter(s) => write!(f, "invalid parameter: {s}"),
            Error::InvalidState(s) => write!(f, "invalid state: {s}"),
            Error::NotHermitian(d) => write!(f, "operator is not Hermitian (deviation {d:e})"),
            Error::Resonance(s) => write!(f, "resonance: {s}"),
            Error::Unnormalized(n) => write!(f, "target state is not normalized (norm {n})"),
            Error::IntegrationFailure { t, step, steps } => {
                write!(
                    f,
                    "integration failed at t = {t} us (step {step:e}, {steps} steps)"
                )
            }
            Error::NonUniqueSteadyState(p) => {
                write!(f, "steady state is not unique (pivot {p:e})")
            }
            Error::SteadyStateResidual(r) => write!(f, "steady-state residual too large: {r:e}"),
            Error::CalibrationFailure(s) => write!(f, "calibration failed: {s}"),
            Error::FitFailure { iterations, cost } => {
                write!(
                    f,
                    "fit did not converge after {iterations} iterations (cost {cost:e})"
                )
            }
            Error::NoRoot(s) => write!(f, "no root found: {s}"),
        }
    }
}

impl core::error::Error for Error {}
