//! Volterra (polynomial) estimators and detectors for noisy measurement
//! records.
//!
//! The crate synthesizes optimal polynomial filters from finite-order
//! moments, reports their error covariances, builds detection rules with
//! Cantelli-type error-probability bounds, and carries a qubit-readout
//! simulation harness plus linear state-tomography helpers.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod features;
pub mod grid;
pub mod linalg;
pub mod moments;
pub mod readout;
pub mod synthetic;
pub mod tomography;

pub use error::{Error, Result};
pub use features::{FeatureIndex, FeatureSet};
pub use grid::TimeGrid;
