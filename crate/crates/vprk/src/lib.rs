//! vprk: a structure-preserving integration toolkit built around one
//! question — when does an implicit Runge-Kutta step preserve phase-space
//! volume, and what measure does it preserve when it does not?
//!
//! The crate provides
//! - implicit Runge-Kutta steps with Newton-solved stages and the four
//!   catalog tableaux (midpoint, trapezoidal, two- and three-stage Gauss),
//! - Kahan's linearly implicit method for quadratic fields and its
//!   Runge-Kutta form,
//! - exact per-step Jacobians and determinants from the stage-matrix
//!   formulas, with finite-difference oracles,
//! - classification of vector fields by the determinant condition
//!   det(I + (h/2)f'(x)) = det(I - (h/2)f'(x)) and its spectral
//!   equivalents,
//! - modified-measure densities (trapezoidal and Kahan families, products,
//!   conjugations) with per-step residuals, and
//! - a registry of reproducible experiments covering the worked examples
//!   and counterexamples, driven by the `vprk` CLI.

pub mod classify;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod integrator;
pub mod jacobian;
pub mod linalg;
pub mod measure;
pub mod sampling;
pub mod tableaux;

pub use error::{Error, Result};
