//! Recover frequency-response data of discrete-time LTI systems from a single
//! time-domain input/output trajectory, and build reduced-order models from it.
//!
//! The core workflow:
//!
//! 1. Simulate (or load) an input/output trajectory of a SISO system
//!    ([`lti::StateSpaceSystem::simulate`]).
//! 2. Estimate the system order from the data alone ([`order_est::estimate_order`]).
//! 3. Recover transfer-function values `M0 ≈ H(σ)` (and optionally derivatives
//!    `M1 ≈ H'(σ)`) at chosen points on or near the unit circle, together with a
//!    data-only error indicator `s_W` ([`informativity::recover`],
//!    [`informativity::adapt_order`]).
//! 4. Fit reduced-order models to the recovered samples: Loewner,
//!    Hermite Loewner, or vector fitting ([`rom`]).
//! 5. Quantify errors against a reference model ([`metrics`]).
//!
//! Each step is exercised by a runnable program under `examples/`; the `tfrecover`
//! binary drives the same pipeline from TOML experiment configs.

pub mod config;
pub mod error;
pub mod informativity;
pub mod io;
mod linalg;
pub mod lti;
pub mod metrics;
pub mod order_est;
pub mod rom;
pub mod runner;

pub use error::{Error, Result};
