//! Interconnection-structure identification for networked dynamic systems
//! built from descriptor-form subsystems, driven by irregularly sampled
//! output data.
//!
//! The crate covers the full estimation pipeline:
//!
//! - [`model`] — descriptor subsystems, the affine interconnection
//!   `Phi(theta)`, assembly of the overall network pencil, and exact
//!   transfer-function evaluation.
//! - [`generator`] — the autonomous input generator, its modal
//!   decomposition, and the time-varying regressor built from it.
//! - [`simulate`] — Sylvester-based steady-state responses, exact transient
//!   simulation, irregular sampling schedules, and noisy data synthesis.
//! - [`stage1`] — estimation of the right tangential interpolation vector
//!   from asynchronous samples (batch least squares and RLS).
//! - [`stage2`] — null-space decoupling of the bilinear parameter/state
//!   coupling and the two linear solves that recover `theta`.
//! - [`chain`] — the spring-mass-damper benchmark network.
//! - [`nls`] — a nonlinear least-squares baseline for comparison.
//!
//! All numerics live in this crate and are `no_std` (with `alloc`);
//! file formats and the experiment CLI live in the companion `ndsid` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod chain;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod nls;
pub mod simulate;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
