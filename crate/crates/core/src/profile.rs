//! Domain profiles: hardware, dataset, job, and cache-split descriptions.
//!
//! All bandwidths are bytes/second, all sizes are bytes, all compute rates
//! are samples/second (see `units` for conversions from spec-sheet units).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which participant count feeds the ring-reduce overhead of each interconnect.
///
/// The gradient-synchronization overhead `2(p-1)/p * model_size` needs a
/// participant count per interconnect, and the two defensible assignments
/// disagree, so both are supported:
///
/// * `NetworkNodes` (default): network overhead uses the node count, PCIe
///   overhead uses the GPUs per node.
/// * `NetworkGpus`: the inverse assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommParticipantMapping {
    #[default]
    NetworkNodes,
    NetworkGpus,
}

impl CommParticipantMapping {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommParticipantMapping::NetworkNodes => "network-nodes",
            CommParticipantMapping::NetworkGpus => "network-gpus",
        }
    }
}

impl FromStr for CommParticipantMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "network-nodes" => Ok(CommParticipantMapping::NetworkNodes),
            "network-gpus" => Ok(CommParticipantMapping::NetworkGpus),
            other => Err(Error::InvalidArgument(format!(
                "unknown comm participant mapping `{other}` (expected `network-nodes` or `network-gpus`)"
            ))),
        }
    }
}

/// Per-node and cluster-wide hardware capabilities of a training setup.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    /// Per-node GPU ingestion rate, samples/s.
    pub t_gpu: f64,
    /// Per-node CPU decode+augment rate, samples/s.
    pub t_decode_augment: f64,
    /// Per-node CPU augment-only rate, samples/s.
    pub t_augment: f64,
    /// Per-node network bandwidth, bytes/s.
    pub b_nic: f64,
    /// Per-node PCIe bandwidth, bytes/s.
    pub b_pcie: f64,
    /// Cluster-wide remote-cache bandwidth, bytes/s.
    pub b_cache: f64,
    /// Cluster-wide remote-storage bandwidth, bytes/s.
    pub b_storage: f64,
    /// Remote-cache capacity, bytes.
    pub cache_capacity: f64,
    /// Homogeneous training nodes in the cluster.
    pub nodes: u32,
    /// GPUs per node (gradient-communication participant count).
    pub gpus_per_node: u32,
    /// Intra-node NVLink zeroes the PCIe gradient overhead.
    pub nvlink_intra: bool,
    /// Inter-node NVLink zeroes both gradient overheads.
    pub nvlink_inter: bool,
    pub comm_mapping: CommParticipantMapping,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_gpu", self.t_gpu),
            ("t_decode_augment", self.t_decode_augment),
            ("t_augment", self.t_augment),
            ("b_nic", self.b_nic),
            ("b_pcie", self.b_pcie),
            ("b_cache", self.b_cache),
            ("b_storage", self.b_storage),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "hardware.{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.cache_capacity < 0.0 || !self.cache_capacity.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "hardware.cache_capacity must be finite and non-negative, got {}",
                self.cache_capacity
            )));
        }
        if self.nodes < 1 {
            return Err(Error::InvalidArgument("hardware.nodes must be >= 1".into()));
        }
        if self.gpus_per_node < 1 {
            return Err(Error::InvalidArgument(
                "hardware.gpus_per_node must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dataset shape: sample count, mean encoded size, and preprocessing inflation.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetProfile {
    /// Total samples in the dataset.
    pub n_total: u64,
    /// Mean encoded sample size, bytes.
    pub s_data: f64,
    /// Decoded/augmented tensor size as a multiple of `s_data`.
    pub inflation: f64,
}

impl DatasetProfile {
    /// Size of a decoded or augmented entry, bytes.
    pub fn inflated_bytes(&self) -> f64 {
        self.inflation * self.s_data
    }

    /// Same dataset rescaled to a different sample count (size sweeps
    /// replicate samples at fixed mean size).
    pub fn with_n_total(&self, n_total: u64) -> Self {
        DatasetProfile { n_total, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total < 1 {
            return Err(Error::InvalidArgument("dataset.n_total must be >= 1".into()));
        }
        if !(self.s_data > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dataset.s_data must be strictly positive, got {}",
                self.s_data
            )));
        }
        if !(self.inflation >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dataset.inflation must be >= 1, got {}",
                self.inflation
            )));
        }
        Ok(())
    }
}

/// Training-job parameters that affect the ingestion pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JobProfile {
    /// Gradient payload per synchronization, bytes. Zero models a
    /// no-synchronization workload.
    pub model_size: f64,
}

impl JobProfile {
    pub fn validate(&self) -> Result<()> {
        if self.model_size < 0.0 || !self.model_size.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "job.model_size must be finite and >= 0, got {}",
                self.model_size
            )));
        }
        Ok(())
    }
}

const SPLIT_SUM_EPS: f64 = 1e-9;

/// Fractions of cache capacity given to each data form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSplit {
    pub x_encoded: f64,
    pub x_decoded: f64,
    pub x_augmented: f64,
}

impl PartitionSplit {
    pub fn new(x_encoded: f64, x_decoded: f64, x_augmented: f64) -> Result<Self> {
        let split = PartitionSplit {
            x_encoded,
            x_decoded,
            x_augmented,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x_encoded", self.x_encoded),
            ("x_decoded", self.x_decoded),
            ("x_augmented", self.x_augmented),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "split.{name} must be within [0, 1], got {v}"
                )));
            }
        }
        let sum = self.x_encoded + self.x_decoded + self.x_augmented;
        if sum > 1.0 + SPLIT_SUM_EPS {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to at most 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// A cache split in whole percents, always summing to exactly 100.
///
/// Displayed as `E-D-A`, e.g. `100-0-0` for an all-encoded cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PercentSplit {
    pub encoded: u8,
    pub decoded: u8,
    pub augmented: u8,
}

impl PercentSplit {
    pub fn new(encoded: u8, decoded: u8, augmented: u8) -> Result<Self> {
        if encoded as u32 + decoded as u32 + augmented as u32 != 100 {
            return Err(Error::InvalidArgument(format!(
                "percent split must sum to 100, got {encoded}-{decoded}-{augmented}"
            )));
        }
        Ok(PercentSplit {
            encoded,
            decoded,
            augmented,
        })
    }

    pub fn to_split(self) -> PartitionSplit {
        PartitionSplit {
            x_encoded: f64::from(self.encoded) / 100.0,
            x_decoded: f64::from(self.decoded) / 100.0,
            x_augmented: f64::from(self.augmented) / 100.0,
        }
    }
}

impl fmt::Display for PercentSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.encoded, self.decoded, self.augmented)
    }
}

impl FromStr for PercentSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "split `{s}` must be an `E-D-A` percent triple, e.g. `100-0-0`"
            )));
        }
        let mut vals = [0u8; 3];
        for (slot, part) in vals.iter_mut().zip(&parts) {
            *slot = part.parse::<u8>().map_err(|_| {
                Error::InvalidArgument(format!("split `{s}` has a non-numeric component `{part}`"))
            })?;
        }
        PercentSplit::new(vals[0], vals[1], vals[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hw() -> HardwareProfile {
        HardwareProfile {
            t_gpu: 4550.0,
            t_decode_augment: 2132.0,
            t_augment: 4050.0,
            b_nic: 1.25e9,
            b_pcie: 3.2e10,
            b_cache: 1.25e9,
            b_storage: 5e8,
            cache_capacity: 6.4e10,
            nodes: 1,
            gpus_per_node: 2,
            nvlink_intra: false,
            nvlink_inter: false,
            comm_mapping: CommParticipantMapping::default(),
        }
    }

    #[test]
    fn hardware_validation_rejects_nonpositive() {
        let mut hw = sample_hw();
        assert!(hw.validate().is_ok());
        hw.b_cache = 0.0;
        assert!(hw.validate().is_err());
        hw = sample_hw();
        hw.nodes = 0;
        assert!(hw.validate().is_err());
    }

    #[test]
    fn dataset_validation() {
        let ds = DatasetProfile {
            n_total: 1_300_000,
            s_data: 114_620.0,
            inflation: 5.12,
        };
        assert!(ds.validate().is_ok());
        assert!((ds.inflated_bytes() - 5.12 * 114_620.0).abs() < 1e-9);
        assert!(DatasetProfile { n_total: 0, ..ds }.validate().is_err());
        assert!(DatasetProfile {
            inflation: 0.5,
            ..ds
        }
        .validate()
        .is_err());
    }

    #[test]
    fn split_bounds() {
        assert!(PartitionSplit::new(0.5, 0.3, 0.2).is_ok());
        assert!(PartitionSplit::new(0.0, 0.0, 0.0).is_ok());
        assert!(PartitionSplit::new(0.5, 0.5, 0.5).is_err());
        assert!(PartitionSplit::new(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn percent_split_roundtrip() {
        let p: PercentSplit = "58-42-0".parse().unwrap();
        assert_eq!(p, PercentSplit::new(58, 42, 0).unwrap());
        assert_eq!(p.to_string(), "58-42-0");
        assert!("58-42-1".parse::<PercentSplit>().is_err());
        assert!("58-42".parse::<PercentSplit>().is_err());
        assert!("a-b-c".parse::<PercentSplit>().is_err());
        let s = p.to_split();
        assert!(s.validate().is_ok());
    }
}
