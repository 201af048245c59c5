//! Reference hardware/dataset pairings used by the bundled example profiles
//! and throughout the test suites.
//!
//! The TOML files under `profiles/` encode the same values; a config test
//! keeps the two representations in sync.

use crate::profile::{CommParticipantMapping, DatasetProfile, HardwareProfile, JobProfile};
use crate::units::{gb, gbit_per_s, kb, mb};

/// Single in-house server (2x RTX 5000 class) with a 64 GB remote cache,
/// paired with a 1.3M-sample image dataset at the profiled 114 KB mean
/// encoded size and 5.12x preprocessing inflation.
pub fn inhouse_imagenet1k() -> (HardwareProfile, DatasetProfile) {
    let hw = HardwareProfile {
        t_gpu: 4550.0,
        t_decode_augment: 2132.0,
        t_augment: 4050.0,
        b_nic: gbit_per_s(10.0),
        b_pcie: gb(32.0),
        b_cache: gbit_per_s(10.0),
        b_storage: mb(500.0),
        cache_capacity: gb(64.0),
        nodes: 1,
        gpus_per_node: 2,
        nvlink_intra: false,
        nvlink_inter: false,
        comm_mapping: CommParticipantMapping::NetworkNodes,
    };
    let ds = DatasetProfile {
        n_total: 1_300_000,
        s_data: kb(114.0),
        inflation: 5.12,
    };
    (hw, ds)
}

/// Single Azure NC96ads-class server (4x A100) with a 64 GB remote cache,
/// paired with a 14M-sample image dataset at 91.39 KB mean encoded size.
pub fn azure_imagenet22k() -> (HardwareProfile, DatasetProfile) {
    let hw = HardwareProfile {
        t_gpu: 14_301.0,
        t_decode_augment: 9783.0,
        t_augment: 12_930.0,
        b_nic: gbit_per_s(80.0),
        b_pcie: gb(64.0),
        b_cache: gbit_per_s(30.0),
        b_storage: mb(250.0),
        cache_capacity: gb(64.0),
        nodes: 1,
        gpus_per_node: 4,
        nvlink_intra: false,
        nvlink_inter: false,
        comm_mapping: CommParticipantMapping::NetworkNodes,
    };
    let ds = DatasetProfile {
        n_total: 14_000_000,
        s_data: kb(91.39),
        inflation: 5.12,
    };
    (hw, ds)
}

/// A job with no gradient-synchronization payload.
pub fn no_sync_job() -> JobProfile {
    JobProfile { model_size: 0.0 }
}
