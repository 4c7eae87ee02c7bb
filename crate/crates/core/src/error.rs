use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("lift is not strictly increasing near x = {at}")]
    NotMonotone { at: f64 },

    #[error("lift is not of degree one: seam gap {gap:e}")]
    NotDegreeOne { gap: f64 },

    #[error("lift evaluated to a non-finite value at x = {at}")]
    NonFinite { at: f64 },

    #[error("could not bracket a preimage of y = {y}")]
    InverseBracket { y: f64 },

    #[error("{what} did not converge within {cap} iterations")]
    NonConvergence { what: &'static str, cap: usize },

    #[error("series of length {len} is too short (need at least {need})")]
    SeriesTooShort { len: usize, need: usize },

    #[error("no points of period {q} with winding {p} were found")]
    NoPeriodicPoints { q: u64, p: i64 },

    #[error("point {z} lies outside the interval [{lo}, {hi}]")]
    OutsideInterval { z: f64, lo: f64, hi: f64 },

    #[error("map has rational rotation number {p}/{q}; no non-atomic invariant measure")]
    RationalRotation { p: i64, q: u64 },

    #[error("map has irrational-like rotation number {value}; periodic machinery does not apply")]
    IrrationalRotation { value: f64 },

    #[error("displacement distribution is singular: {0}")]
    SingularDistribution(String),

    #[error("map carries no exact conjugacy metadata")]
    MissingConjugacy,

    #[error("rotation numbers disagree: metadata {exact} vs estimate {estimate}")]
    RotationMismatch { exact: f64, estimate: f64 },

    #[error("measure is not normalized (total weight {total})")]
    Unnormalized { total: f64 },

    #[error("no threshold crossing from reset time {t} within horizon {horizon}")]
    NonFiring { t: f64, horizon: f64 },

    #[error("forcing is not 1-periodic: |f(t+1) - f(t)| = {gap:e} at t = {t}")]
    NonPeriodicForcing { t: f64, gap: f64 },

    #[error("neither forward nor backward condition holds at x0 = {x0}")]
    InvariantViolation { x0: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error report.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "E_PARAM",
            Error::NotMonotone { .. } => "E_NOT_MONOTONE",
            Error::NotDegreeOne { .. } => "E_DEGREE",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::InverseBracket { .. } => "E_INVERSE",
            Error::NonConvergence { .. } => "E_NON_CONVERGENCE",
            Error::SeriesTooShort { .. } => "E_SHORT_SERIES",
            Error::NoPeriodicPoints { .. } => "E_NO_PERIODIC",
            Error::OutsideInterval { .. } => "E_OUTSIDE",
            Error::RationalRotation { .. } => "E_RATIONAL",
            Error::IrrationalRotation { .. } => "E_IRRATIONAL",
            Error::SingularDistribution(_) => "E_SINGULAR",
            Error::MissingConjugacy => "E_NO_CONJUGACY",
            Error::RotationMismatch { .. } => "E_ROTATION_MISMATCH",
            Error::Unnormalized { .. } => "E_UNNORMALIZED",
            Error::NonFiring { .. } => "E_NON_FIRING",
            Error::NonPeriodicForcing { .. } => "E_FORCING",
            Error::InvariantViolation { .. } => "E_INVARIANT",
            Error::Parse(_) => "E_PARSE",
            Error::Io(_) => "E_IO",
        }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
