use thiserror::Error;

use crate::hilbert::SpaceDims;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("dimension cap exceeded: {dim} > {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimsMismatch(SpaceDims, SpaceDims),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("step size underflow at t = {t:e} (state norm {norm:e})")]
    StepUnderflow { t: f64, norm: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("leakage: top-Fock memory population {population:e} at t = {t:e}")]
    Leakage { t: f64, population: f64 },
    #[error("no eigenvalue separated from the steady space: {0}")]
    DegenerateGap(String),
    #[error("indefinite steady state: smallest eigenvalue {0:e}")]
    IndefiniteSteadyState(f64),
    #[error("pulse sequence: {0}")]
    Sequence(String),
    #[error("trajectory blow-up at t = {t:e}: |a| = {a:e}, |b| = {b:e}")]
    BlowUp { t: f64, a: f64, b: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
