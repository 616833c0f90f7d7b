//! Content-aware redundancy elimination (CARE) for disaster-area DTNs:
//! similarity scoring, a staged detection pipeline, redundancy
//! quantification, and a deterministic epidemic-routing simulator that
//! compares CARE-augmented delivery against a plain epidemic baseline.

pub mod config;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod mobility;
pub mod phash;
pub mod redundancy;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod workload;

pub use error::{CoreError, Result};
