//! Aggregate thermal dynamic model (ATDM) for building clusters.
//!
//! * [`model`]: datasets, design matrices, prediction, metrics, synthetic data.
//! * [`estimator`]: block coordinate descent fit of the aggregate model.
//! * [`protocol`]: multi-party fit where zone data never leaves its owner.
//! * [`adversary`]: equation counting and collusion attacks on the protocol.

pub mod adversary;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod protocol;

/// Formats a float with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
