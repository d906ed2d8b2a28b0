//! Files, experiment harness and CLI around `fcdd-core`.
//!
//! Datasets are PPM/PGM trees with a JSON manifest, checkpoints are a small
//! little-endian binary format, and every finished run appends one JSON line
//! to `results.jsonl`. [`harness`] holds the commands behind the `fcdd`
//! binary so they can be driven from tests.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod pnm;
pub mod records;

pub use error::{Error, Result};
