#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Privacy accounting for noisy gradient descent.
//!
//! Tradeoff functions, Gaussian DP, shifted-interpolation schedules,
//! theorem-level bounds for full-batch, cyclic and stochastic noisy gradient
//! descent, conversions between privacy notions, and numerical composition
//! of subsampled Gaussian factors through privacy-loss random variables.

pub mod accountant;
pub mod conversions;
pub mod error;
pub mod io;
pub mod normal;
pub mod oracle;
pub mod prv;
pub mod report;
pub mod schedule;
pub mod sweep;
pub mod tables;
pub mod tradeoff;

pub use error::{Error, Result};
