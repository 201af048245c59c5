//! Modeling and simulation toolkit for ML data storage and ingestion (DSI)
//! pipelines.
//!
//! Three pieces fit together:
//!
//! * [`model`] — an analytic throughput model of the fetch/decode/augment/
//!   load pipeline, parameterized by hardware, dataset, and job profiles.
//! * [`planner`] — brute-force search over cache splits (encoded/decoded/
//!   augmented percents) maximizing modeled throughput, plus dataset-size
//!   sweeps.
//! * [`sim`] — a deterministic multi-job simulator of opportunistic data
//!   sampling ([`ods`]) over a tiered in-memory cache ([`cache`]), with an
//!   eviction-free uniform-random baseline for comparison.
//!
//! The `dsi-bench` binary wraps all of it behind `plan`, `simulate`, and
//! `sweep` subcommands driven by TOML profiles ([`config`]).

pub mod bitset;
pub mod cache;
pub mod config;
pub mod error;
pub mod model;
pub mod ods;
pub mod planner;
pub mod presets;
pub mod profile;
pub mod sim;
pub mod units;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
