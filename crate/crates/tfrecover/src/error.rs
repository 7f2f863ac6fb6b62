//! Crate-wide error type.

use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector has the wrong size for the requested operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// The trajectory is too short for the requested construction.
    #[error("{context}: need at least {needed} samples, got {got}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    /// A scalar or structural parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `zI - A` is numerically singular at the requested point.
    #[error("resolvent is singular at z = {z}")]
    SingularResolvent { z: Complex64 },

    /// `zE - A` is numerically singular at the requested point.
    #[error("matrix pencil is singular at z = {z}")]
    SingularPencil { z: Complex64 },

    /// The pencil could not be diagonalized to working accuracy.
    #[error("defective pencil: eigenvector matrix is numerically singular; eigenvalues: {eigenvalues:?}")]
    DefectivePencil { eigenvalues: Vec<Complex64> },

    /// The augmented least-squares system lost rank; the uniqueness check
    /// should normally reject such windows first.
    #[error("rank-deficient augmented system in {0}")]
    RankDeficient(&'static str),

    /// Generic numerical failure (non-convergence, NaN, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Bad experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    /// The command-line driver maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InsufficientData { .. }
                | Error::InvalidParameter(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
