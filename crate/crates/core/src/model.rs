//! Analytic throughput model of the data storage and ingestion (DSI) pipeline.
//!
//! The pipeline moves samples from a remote cache or remote storage through
//! the NIC, the CPU (decode and/or augment), and PCIe into the GPUs. Each
//! cacheable data form (encoded, decoded, augmented) exercises a different
//! subset of those components, and the achievable rate for a form is the
//! minimum over its per-component candidate rates:
//!
//! * augmented hits: cache bw, NIC, PCIe, GPU — no CPU work, inflated size
//! * decoded hits:   the above plus the CPU augment-only rate
//! * encoded hits:   cache/NIC at encoded size, CPU decode+augment, PCIe at
//!   inflated size (tensors cross PCIe after preprocessing), GPU
//! * storage reads:  the encoded path further capped by storage bandwidth
//!
//! Cluster-wide quantities (cache and storage bandwidth) appear once; all
//! per-node quantities scale with the node count. Overall throughput is the
//! cache-population-weighted mix of the four per-form rates.

use crate::error::{Error, Result};
use crate::profile::{
    CommParticipantMapping, DatasetProfile, HardwareProfile, JobProfile, PartitionSplit,
};
use crate::units::tier_entry_capacity;

/// The component that bounds a tier's throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitingFactor {
    CacheBw,
    Nic,
    Pcie,
    CpuAugment,
    CpuDecodeAugment,
    Gpu,
    StorageBw,
}

impl LimitingFactor {
    pub fn as_str(&self) -> &'static str {
        match self {
            LimitingFactor::CacheBw => "cache-bw",
            LimitingFactor::Nic => "nic",
            LimitingFactor::Pcie => "pcie",
            LimitingFactor::CpuAugment => "cpu-augment",
            LimitingFactor::CpuDecodeAugment => "cpu-decode-augment",
            LimitingFactor::Gpu => "gpu",
            LimitingFactor::StorageBw => "storage-bw",
        }
    }
}

/// A tier throughput together with the component that bounds it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierRate {
    pub samples_per_s: f64,
    pub limited_by: LimitingFactor,
}

/// Steady-state cache population per data form (Eqs. fill in priority
/// order augmented, decoded, encoded; the remainder stays on storage).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CachedCounts {
    pub n_augmented: u64,
    pub n_decoded: u64,
    pub n_encoded: u64,
    pub n_storage: u64,
}

/// Full model evaluation for one (hardware, dataset, job, split) tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub dsi_augmented: TierRate,
    pub dsi_decoded: TierRate,
    pub dsi_encoded: TierRate,
    pub dsi_storage: TierRate,
    pub counts: CachedCounts,
    pub dsi_overall: f64,
}

/// Ring-reduce gradient payload for one synchronization:
/// `2 (p - 1) / p * model_size` bytes.
pub fn comm_overhead(participants: u32, model_size: f64) -> Result<f64> {
    if participants == 0 {
        return Err(Error::InvalidArgument(
            "comm_overhead requires at least one participant".into(),
        ));
    }
    let p = f64::from(participants);
    Ok(2.0 * (p - 1.0) / p * model_size)
}

/// Network and PCIe gradient overheads in bytes, with NVLink zeroing applied.
pub fn comm_overheads(hw: &HardwareProfile, job: &JobProfile) -> (f64, f64) {
    let (nw_participants, pcie_participants) = match hw.comm_mapping {
        CommParticipantMapping::NetworkNodes => (hw.nodes, hw.gpus_per_node),
        CommParticipantMapping::NetworkGpus => (hw.gpus_per_node, hw.nodes),
    };
    // Participant counts are >= 1 by profile invariant.
    let mut c_nw = comm_overhead(nw_participants, job.model_size).unwrap_or(0.0);
    let mut c_pcie = comm_overhead(pcie_participants, job.model_size).unwrap_or(0.0);
    if hw.nvlink_intra {
        c_pcie = 0.0;
    }
    if hw.nvlink_inter {
        c_pcie = 0.0;
        c_nw = 0.0;
    }
    (c_nw, c_pcie)
}

/// Min over candidate rates; the first minimal term wins ties so the
/// reported limiting factor is deterministic. Terms whose denominator was
/// zero are encoded as non-finite by the callers and skipped here.
fn min_rate(candidates: &[(f64, LimitingFactor)]) -> TierRate {
    let mut best: Option<TierRate> = None;
    for &(rate, factor) in candidates {
        if !rate.is_finite() {
            continue;
        }
        match best {
            Some(b) if b.samples_per_s <= rate => {}
            _ => {
                best = Some(TierRate {
                    samples_per_s: rate,
                    limited_by: factor,
                })
            }
        }
    }
    // All real profiles leave at least the GPU term; guarded for safety.
    best.unwrap_or(TierRate {
        samples_per_s: 0.0,
        limited_by: LimitingFactor::Gpu,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN // excluded from the min-set
    } else {
        num / den
    }
}

/// Throughput when serving augmented (training-ready) cache hits.
pub fn dsi_augmented(hw: &HardwareProfile, ds: &DatasetProfile, job: &JobProfile) -> TierRate {
    let n = f64::from(hw.nodes);
    let inflated = ds.inflated_bytes();
    let (c_nw, c_pcie) = comm_overheads(hw, job);
    min_rate(&[
        (ratio(hw.b_cache, inflated), LimitingFactor::CacheBw),
        (ratio(n * hw.b_nic, inflated + c_nw), LimitingFactor::Nic),
        (ratio(n * hw.b_pcie, inflated + c_pcie), LimitingFactor::Pcie),
        (n * hw.t_gpu, LimitingFactor::Gpu),
    ])
}

/// Throughput when serving decoded cache hits (adds the augment-only CPU
/// stage to the augmented path).
pub fn dsi_decoded(hw: &HardwareProfile, ds: &DatasetProfile, job: &JobProfile) -> TierRate {
    let n = f64::from(hw.nodes);
    let inflated = ds.inflated_bytes();
    let (c_nw, c_pcie) = comm_overheads(hw, job);
    min_rate(&[
        (ratio(hw.b_cache, inflated), LimitingFactor::CacheBw),
        (ratio(n * hw.b_nic, inflated + c_nw), LimitingFactor::Nic),
        (n * hw.t_augment, LimitingFactor::CpuAugment),
        (ratio(n * hw.b_pcie, inflated + c_pcie), LimitingFactor::Pcie),
        (n * hw.t_gpu, LimitingFactor::Gpu),
    ])
}

/// Throughput when serving encoded cache hits. Cache and NIC move encoded
/// bytes; PCIe moves the inflated tensor produced by the CPU.
pub fn dsi_encoded(hw: &HardwareProfile, ds: &DatasetProfile, job: &JobProfile) -> TierRate {
    let n = f64::from(hw.nodes);
    let inflated = ds.inflated_bytes();
    let (c_nw, c_pcie) = comm_overheads(hw, job);
    min_rate(&[
        (ratio(hw.b_cache, ds.s_data), LimitingFactor::CacheBw),
        (ratio(n * hw.b_nic, ds.s_data + c_nw), LimitingFactor::Nic),
        (n * hw.t_decode_augment, LimitingFactor::CpuDecodeAugment),
        (ratio(n * hw.b_pcie, inflated + c_pcie), LimitingFactor::Pcie),
        (n * hw.t_gpu, LimitingFactor::Gpu),
    ])
}

/// Throughput when reading from remote storage: the encoded path further
/// capped by storage bandwidth.
pub fn dsi_storage(hw: &HardwareProfile, ds: &DatasetProfile, job: &JobProfile) -> TierRate {
    let encoded = dsi_encoded(hw, ds, job);
    let storage_rate = ratio(hw.b_storage, ds.s_data);
    if storage_rate.is_finite() && storage_rate < encoded.samples_per_s {
        TierRate {
            samples_per_s: storage_rate,
            limited_by: LimitingFactor::StorageBw,
        }
    } else {
        encoded
    }
}

/// Steady-state cached sample counts for a split.
///
/// Tiers fill in priority order augmented, decoded, encoded; each takes the
/// smaller of its capacity and the samples left over from higher-priority
/// tiers, so the four counts always partition the dataset exactly.
pub fn cached_counts(
    hw: &HardwareProfile,
    ds: &DatasetProfile,
    split: &PartitionSplit,
) -> CachedCounts {
    let inflated = ds.inflated_bytes();
    let cap_a = tier_entry_capacity(split.x_augmented, hw.cache_capacity, inflated);
    let cap_d = tier_entry_capacity(split.x_decoded, hw.cache_capacity, inflated);
    let cap_e = tier_entry_capacity(split.x_encoded, hw.cache_capacity, ds.s_data);

    let n_augmented = ds.n_total.min(cap_a);
    let n_decoded = (ds.n_total - n_augmented).min(cap_d);
    let n_encoded = (ds.n_total - n_augmented - n_decoded).min(cap_e);
    let n_storage = ds.n_total - n_augmented - n_decoded - n_encoded;
    CachedCounts {
        n_augmented,
        n_decoded,
        n_encoded,
        n_storage,
    }
}

/// Overall pipeline throughput: the per-form rates weighted by the fraction
/// of the dataset resident in each form.
pub fn evaluate(
    hw: &HardwareProfile,
    ds: &DatasetProfile,
    job: &JobProfile,
    split: &PartitionSplit,
) -> ModelOutput {
    let dsi_a = dsi_augmented(hw, ds, job);
    let dsi_d = dsi_decoded(hw, ds, job);
    let dsi_e = dsi_encoded(hw, ds, job);
    let dsi_s = dsi_storage(hw, ds, job);
    let counts = cached_counts(hw, ds, split);
    let n_total = ds.n_total as f64;
    let dsi_overall = (counts.n_augmented as f64 / n_total) * dsi_a.samples_per_s
        + (counts.n_decoded as f64 / n_total) * dsi_d.samples_per_s
        + (counts.n_encoded as f64 / n_total) * dsi_e.samples_per_s
        + (counts.n_storage as f64 / n_total) * dsi_s.samples_per_s;
    ModelOutput {
        dsi_augmented: dsi_a,
        dsi_decoded: dsi_d,
        dsi_encoded: dsi_e,
        dsi_storage: dsi_s,
        counts,
        dsi_overall,
    }
}
