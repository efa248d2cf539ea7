//! Street-canyon mmWave measurement analysis: per-link channel metrics,
//! path-gain fitting, coverage prediction and spectrum-consumption-model
//! based deconfliction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod pathloss;
pub mod coverage;
pub mod synth;
pub mod scm;
pub mod compat;
pub mod deconflict;
pub mod site;
pub mod cli;

pub use error::{Error, Result};
