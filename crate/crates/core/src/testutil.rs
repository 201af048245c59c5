//! Shared helpers for the unit-test suites.

pub use crate::presets::{azure_imagenet22k, inhouse_imagenet1k, no_sync_job};

/// Relative tolerance for values that should be exact after unit
/// normalization (one or two float operations away from the inputs).
pub const REL_TOL: f64 = 1e-9;

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        actual.abs()
    } else {
        ((actual - expected) / expected).abs()
    }
}

pub fn assert_rel_eq(actual: f64, expected: f64, tol: f64) {
    assert!(
        rel_err(actual, expected) <= tol,
        "expected {expected}, got {actual} (rel err {})",
        rel_err(actual, expected)
    );
}
