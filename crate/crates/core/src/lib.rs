//! Deconfounded warm-start Thompson sampling.
//!
//! Confounded offline data are debiased per arm, the reliable measured
//! coordinates are selected by a threshold, and linear Thompson sampling is
//! warm-started on the reduced context of selected covariates plus the
//! formerly hidden features.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clinical;
pub mod deconfound;
pub mod error;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
