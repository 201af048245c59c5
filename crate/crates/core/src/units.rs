//! Unit conversions to the canonical internal units.
//!
//! Everything inside the library is bytes and bytes/second. Profile files
//! and hardware spec sheets mix Gbit/s, GB/s and MB/s, so all conversion
//! happens here, in one place, with decimal (powers of ten) prefixes.

pub const KB: f64 = 1e3;
pub const MB: f64 = 1e6;
pub const GB: f64 = 1e9;
pub const TB: f64 = 1e12;

/// Gigabits per second to bytes per second.
pub fn gbit_per_s(v: f64) -> f64 {
    v * 1e9 / 8.0
}

/// Megabits per second to bytes per second.
pub fn mbit_per_s(v: f64) -> f64 {
    v * 1e6 / 8.0
}

/// Kilobits per second to bytes per second.
pub fn kbit_per_s(v: f64) -> f64 {
    v * 1e3 / 8.0
}

pub fn kb(v: f64) -> f64 {
    v * KB
}

pub fn mb(v: f64) -> f64 {
    v * MB
}

pub fn gb(v: f64) -> f64 {
    v * GB
}

pub fn tb(v: f64) -> f64 {
    v * TB
}

/// Number of whole cache entries that fit in `fraction` of `capacity_bytes`.
///
/// A partially cached sample is not a hit, so fractional entries floor.
/// Both the analytic model and the cache substrate size their tiers through
/// this function so the two can never disagree by a rounding ulp.
pub fn tier_entry_capacity(fraction: f64, capacity_bytes: f64, entry_bytes: f64) -> u64 {
    debug_assert!(entry_bytes > 0.0);
    let entries = fraction * capacity_bytes / entry_bytes;
    if entries <= 0.0 {
        0
    } else {
        entries.floor() as u64
    }
}
