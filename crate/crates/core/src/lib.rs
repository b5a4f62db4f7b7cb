//! Simulation and analysis toolkit for a cavity-filtered, narrowband
//! source of polarization-entangled photon pairs from type-II SPDC in PPKTP.
//!
//! The pipeline runs from crystal phase matching ([`crystal`]) through the
//! cascaded Fabry-Perot filter line ([`filter`]), Monte-Carlo pair emission
//! and detection ([`pairsim`]), coincidence analysis ([`correlator`]) and
//! two-qubit state tomography ([`tomography`]). [`config`] and [`pipeline`]
//! bind them into reproducible runs.

// Negated comparisons (`!(x > 0.0)`) are used on purpose so NaN fails
// validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod correlator;
pub mod crystal;
pub mod error;
pub mod filter;
pub mod pairsim;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod tomography;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
