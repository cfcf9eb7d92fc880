//! Twin-beam heterodyne polarimetry.
//!
//! * [`fock`]: exact two-mode Fock-space moments of the rotated number
//!   difference, with a dense-matrix oracle.
//! * [`sideband`]: closed-form noise floor of the heterodyne measurement.
//! * [`timeseries`]: seeded time-domain simulation of fields and photocurrents.
//! * [`impairments`]: crosstalk, beat jitter, servo sidebands, electronics.
//! * [`spectral`]: spectrum-analyzer emulation and metric extraction.
//! * [`scenario`]: configuration, presets, runs, sweeps and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod impairments;
pub mod noise;
pub mod scenario;
pub mod sideband;
pub mod spectral;
pub mod timeseries;
pub mod trace_dump;

pub use error::{Error, Result};
