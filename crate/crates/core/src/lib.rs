//! Two-phase calibration of low-cost particulate sensors.
//!
//! A linear first phase is followed by an error estimator and a random
//! forest that takes the estimated error as an extra input.

pub mod dataset;
pub mod error;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod nanny;
pub mod parallel;
pub mod pipeline;
pub mod regress;
pub mod report;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
