//! Noise-level estimation for high-dimensional Gaussian linear models.
//!
//! The crate is `no_std` (it needs `alloc`). It reduces a linear model
//! `Y = X·β + σ·ξ` to its spectral form, evaluates ordered spectral
//! regularizers, builds the concentration envelope and the geometric
//! regularization grid, and selects the regularization parameter that
//! minimizes the penalized variance criterion. The [`splines`] module
//! instantiates the same machinery for smoothing splines through the
//! Demmler–Reinsch basis.
//!
//! IO, the command-line front end and the Monte Carlo harness live in the
//! `noise-floor` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod envelope;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod quadrature;
pub mod regularizers;
pub mod spectral;
pub mod splines;

pub use envelope::{AlphaGrid, EnvelopeParams, GridSpec, GridWarning, Q_CONST};
pub use error::{Error, Result};
pub use estimator::{EstimateReport, OracleReport};
pub use regularizers::{FamilyKind, Regularizer, SpectralFunctionals};
pub use spectral::{LinearModelData, SpectralBasis, SpectralModel};
pub use splines::{SplineBasis, SplineFitReport, SplineNoiseEstimator};
