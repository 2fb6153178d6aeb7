//! Crate-wide error type.

use alloc::string::String;
use core::fmt;
use num_complex::Complex64;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by model assembly, simulation, and the estimation stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix shapes are inconsistent; carries the subsystem index when one
    /// can be blamed.
    Dimension {
        subsystem: Option<usize>,
        detail: String,
    },
    /// The input generator violates the distinct-eigenvalue assumption or is
    /// not given in real modal coordinates.
    AssumptionViolation(String),
    /// An eigenvalue of the generator coincides with a generalized eigenvalue
    /// of the network pencil, so the Sylvester system is singular.
    EigenvalueCollision {
        generator_eigenvalue: Complex64,
        pencil_eigenvalue: Complex64,
        gap: f64,
    },
    /// The pencil `s*E_bar - A_theta` is singular at the requested point.
    SingularPencil { s: Complex64 },
    /// `I - D_zv * Phi(theta)` is singular; internal signals are not uniquely
    /// determined.
    WellPosedness,
    /// Full time-domain simulation needs an invertible `E`; use
    /// steady-state-only sampling for singular descriptors.
    UnsupportedDescriptorSimulation,
    /// No steady-state samples remain after discarding `t < t_settle`.
    InsufficientData,
    /// An RLS update was fed a sample taken before the settling bound.
    PreSettlingSample { t: f64, t_settle: f64 },
    /// A sampling schedule request was empty or inverted.
    InvalidSchedule(String),
    /// A benchmark chain specification is invalid.
    InvalidSpec(String),
    /// A dense linear solve or factorization failed.
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(subsystem: impl Into<Option<usize>>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            subsystem: subsystem.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { subsystem, detail } => match subsystem {
                Some(k) => write!(f, "dimension mismatch in subsystem {k}: {detail}"),
                None => write!(f, "dimension mismatch: {detail}"),
            },
            Error::AssumptionViolation(msg) => write!(f, "assumption violated: {msg}"),
            Error::EigenvalueCollision {
                generator_eigenvalue,
                pencil_eigenvalue,
                gap,
            } => write!(
                f,
                "generator eigenvalue {generator_eigenvalue} collides with pencil eigenvalue \
                 {pencil_eigenvalue} (gap {gap:.3e})"
            ),
            Error::SingularPencil { s } => {
                write!(f, "pencil s*E_bar - A_theta is singular at s = {s}")
            }
            Error::WellPosedness => write!(f, "I - D_zv*Phi(theta) is singular (not well-posed)"),
            Error::UnsupportedDescriptorSimulation => write!(
                f,
                "E is singular; full time-domain simulation unavailable, use steady-state sampling"
            ),
            Error::InsufficientData => write!(f, "no steady-state samples (all t < t_settle)"),
            Error::PreSettlingSample { t, t_settle } => {
                write!(f, "sample at t = {t} precedes the settling bound {t_settle}")
            }
            Error::InvalidSchedule(msg) => write!(f, "invalid schedule: {msg}"),
            Error::InvalidSpec(msg) => write!(f, "invalid chain spec: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
