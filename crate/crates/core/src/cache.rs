//! Capacity-accounted three-partition cache substrate.
//!
//! Entries are uniform-size per tier (mean encoded size for the encoded
//! tier, inflated tensor size for decoded/augmented), so capacity is
//! tracked in whole entry slots and occupancy can never drift from the
//! membership count. No payload bytes are stored; only membership.
//!
//! Every sample lives in exactly one place: one of the three tiers or the
//! storage backend. The storage side is indexed too so eviction refill can
//! draw uniform random storage-resident samples in O(1).

use rand::Rng;

use crate::error::{Error, Result};
use crate::profile::{DatasetProfile, PartitionSplit};
use crate::units::tier_entry_capacity;

pub type SampleId = u32;

/// Cacheable data forms, in replacement/admission readiness order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Augmented,
    Decoded,
    Encoded,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Augmented, Tier::Decoded, Tier::Encoded];

    fn index(self) -> usize {
        match self {
            Tier::Augmented => 0,
            Tier::Decoded => 1,
            Tier::Encoded => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Augmented => "augmented",
            Tier::Decoded => "decoded",
            Tier::Encoded => "encoded",
        }
    }
}

const LOC_STORAGE: u8 = 3;

/// Indexed membership set: O(1) insert, swap-remove, and uniform sampling.
#[derive(Debug, Clone)]
struct IndexSet {
    members: Vec<SampleId>,
}

#[derive(Debug, Clone)]
pub struct TieredCache {
    n_total: u32,
    entry_bytes: [f64; 3],
    slot_capacity: [u64; 3],
    tiers: [IndexSet; 3],
    storage: IndexSet,
    /// Which set each sample is in (tier index or `LOC_STORAGE`).
    location: Vec<u8>,
    /// Position of each sample inside its current set.
    pos: Vec<u32>,
}

impl TieredCache {
    pub fn new(ds: &DatasetProfile, split: &PartitionSplit, cache_capacity: f64) -> Result<Self> {
        ds.validate()?;
        split.validate()?;
        if ds.n_total > u32::MAX as u64 {
            return Err(Error::InvalidArgument(format!(
                "dataset of {} samples exceeds the cache substrate limit",
                ds.n_total
            )));
        }
        let n_total = ds.n_total as u32;
        let inflated = ds.inflated_bytes();
        let entry_bytes = [inflated, inflated, ds.s_data];
        let slot_capacity = [
            tier_entry_capacity(split.x_augmented, cache_capacity, inflated),
            tier_entry_capacity(split.x_decoded, cache_capacity, inflated),
            tier_entry_capacity(split.x_encoded, cache_capacity, ds.s_data),
        ];
        Ok(TieredCache {
            n_total,
            entry_bytes,
            slot_capacity,
            tiers: std::array::from_fn(|_| IndexSet { members: Vec::new() }),
            storage: IndexSet {
                members: (0..n_total).collect(),
            },
            location: vec![LOC_STORAGE; n_total as usize],
            pos: (0..n_total).collect(),
        })
    }

    pub fn n_total(&self) -> u32 {
        self.n_total
    }

    /// Tier holding the sample, or `None` when it is storage-resident only.
    #[inline]
    pub fn lookup(&self, id: SampleId) -> Option<Tier> {
        match self.location[id as usize] {
            0 => Some(Tier::Augmented),
            1 => Some(Tier::Decoded),
            2 => Some(Tier::Encoded),
            _ => None,
        }
    }

    pub fn len(&self, tier: Tier) -> u64 {
        self.tiers[tier.index()].members.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.iter().all(|t| t.members.is_empty())
    }

    pub fn slot_capacity(&self, tier: Tier) -> u64 {
        self.slot_capacity[tier.index()]
    }

    pub fn has_room(&self, tier: Tier) -> bool {
        self.len(tier) < self.slot_capacity(tier)
    }

    pub fn occupancy_bytes(&self, tier: Tier) -> f64 {
        self.len(tier) as f64 * self.entry_bytes[tier.index()]
    }

    pub fn capacity_bytes(&self, tier: Tier) -> f64 {
        self.slot_capacity(tier) as f64 * self.entry_bytes[tier.index()]
    }

    pub fn members(&self, tier: Tier) -> &[SampleId] {
        &self.tiers[tier.index()].members
    }

    pub fn storage_resident_count(&self) -> u64 {
        self.storage.members.len() as u64
    }

    /// Inserts a storage-resident sample into `tier` if a slot is free.
    /// Returns whether it was admitted; a sample that is already cached
    /// anywhere is an error.
    pub fn admit(&mut self, id: SampleId, tier: Tier) -> Result<bool> {
        self.check_id(id)?;
        if self.location[id as usize] != LOC_STORAGE {
            return Err(Error::InvalidState(format!(
                "sample {id} is already cached in the {} tier",
                self.lookup(id).expect("cached").as_str()
            )));
        }
        if !self.has_room(tier) {
            return Ok(false);
        }
        self.remove_from_current(id);
        self.push_to(id, tier.index() as u8);
        Ok(true)
    }

    /// Removes a cached sample; it becomes storage-resident again.
    pub fn evict(&mut self, id: SampleId) -> Result<()> {
        self.check_id(id)?;
        if self.location[id as usize] == LOC_STORAGE {
            return Err(Error::InvalidState(format!("sample {id} is not cached")));
        }
        self.remove_from_current(id);
        self.push_to(id, LOC_STORAGE);
        Ok(())
    }

    /// Uniform random storage-resident sample, or `None` when storage holds
    /// nothing but the ids in `exclude` (rejection-sampled; `exclude` is
    /// expected to be small).
    pub fn random_storage_resident<R: Rng>(
        &self,
        rng: &mut R,
        exclude: &[SampleId],
    ) -> Option<SampleId> {
        let len = self.storage.members.len();
        let excluded_here = exclude
            .iter()
            .filter(|&&id| self.location[id as usize] == LOC_STORAGE)
            .count();
        if len == 0 || len <= excluded_here {
            return None;
        }
        loop {
            let id = self.storage.members[rng.gen_range(0..len)];
            if !exclude.contains(&id) {
                return Some(id);
            }
        }
    }

    fn check_id(&self, id: SampleId) -> Result<()> {
        if id >= self.n_total {
            return Err(Error::InvalidArgument(format!(
                "sample id {id} out of range (dataset has {} samples)",
                self.n_total
            )));
        }
        Ok(())
    }

    fn set_of(&mut self, loc: u8) -> &mut IndexSet {
        if loc == LOC_STORAGE {
            &mut self.storage
        } else {
            &mut self.tiers[loc as usize]
        }
    }

    fn remove_from_current(&mut self, id: SampleId) {
        let loc = self.location[id as usize];
        let p = self.pos[id as usize] as usize;
        let set = self.set_of(loc);
        let last = *set.members.last().expect("non-empty by invariant");
        set.members.swap_remove(p);
        if last != id {
            self.pos[last as usize] = p as u32;
        }
    }

    fn push_to(&mut self, id: SampleId, loc: u8) {
        let set = self.set_of(loc);
        set.members.push(id);
        let p = (set.members.len() - 1) as u32;
        self.location[id as usize] = loc;
        self.pos[id as usize] = p;
    }
}
