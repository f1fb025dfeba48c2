//! Averaging, homotopy-index bookkeeping and recurrence diagnostics for
//! scalar parabolic equations with quasi-periodic coefficients.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging_lab;
pub mod cli;
pub mod coefficients;
pub mod conley;
pub mod error;
pub mod process;
pub mod propagator;
pub mod recurrence;
pub mod sampling;
pub mod spectral_field;
pub mod symbols;

pub use error::{Error, Result};
