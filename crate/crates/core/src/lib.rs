//! Quasi-cyclic repeat-accumulate (QC-RA) codes for CV-QKD reconciliation.

pub mod channel;
pub mod codebook;
pub mod cvqkd;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod harness;
pub mod rate_adapt;
pub mod stats;

pub use error::{Error, Result, TableError};
