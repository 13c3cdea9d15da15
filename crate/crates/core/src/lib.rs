//! Click-pattern statistics of Gaussian boson sampling with realistic
//! photon-number-resolving detectors, plus orbit-based validation tests.

pub mod config;
pub mod conformance;
pub mod detectors;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod gaussian;
pub mod linalg;
pub mod orbits;
pub mod probability;
pub mod sampling;
pub mod validation;

pub use error::{GbsError, Result};
