//! Opportunistic data sampling over the tiered cache.
//!
//! Jobs request pseudo-random batches of unseen sample ids. Requested ids
//! that miss the cache are opportunistically replaced with cached samples
//! the job has not seen this epoch, preferring the most training-ready
//! tier (augmented, then decoded, then encoded). Per-sample reference
//! counts track how many jobs consumed each augmented entry; entries that
//! reach the eviction threshold (the job count) are swapped for fresh
//! random storage-resident samples during maintenance. Per-job `seen` bit
//! vectors guarantee once-per-epoch delivery no matter how aggressively
//! batches are rewritten.
//!
//! Augmented entries are single-use per job: within an epoch the seen bit
//! blocks repeats, and an entry that was consumed by only a subset of jobs
//! is purged when every job finishes its epoch, so a reset seen vector can
//! never re-expose a partially consumed entry. Encoded and decoded entries
//! are reusable across epochs and never reference-counted.
//!
//! Replacement candidates (cached, unseen, still serviceable) are kept in
//! per-job per-tier index sets maintained incrementally, so picking one is
//! O(1) and exactly uniform even when the pool is almost empty.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bitset::BitSet;
use crate::cache::{SampleId, Tier, TieredCache};
use crate::error::{Error, Result};
use crate::profile::{DatasetProfile, PartitionSplit};

/// Jobs are dense indices handed out by [`OdsSampler::register_job`].
pub type JobId = usize;

/// Status+refcount metadata packs into one byte per sample (2 status bits,
/// 6 reference-count bits), which bounds the registered-job count.
pub const MAX_JOBS: usize = 63;

/// Where a delivered sample was served from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Augmented,
    Decoded,
    Encoded,
    Storage,
}

impl From<Tier> for Source {
    fn from(tier: Tier) -> Self {
        match tier {
            Tier::Augmented => Source::Augmented,
            Tier::Decoded => Source::Decoded,
            Tier::Encoded => Source::Encoded,
        }
    }
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Augmented => "augmented",
            Source::Decoded => "decoded",
            Source::Encoded => "encoded",
            Source::Storage => "storage",
        }
    }
}

/// One delivered sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Served {
    pub id: SampleId,
    pub source: Source,
}

/// Response to a batch request: same length as the request, positionally
/// aligned (a miss position carries its replacement), all ids distinct and
/// previously unseen by the requesting job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchResponse {
    pub served: Vec<Served>,
}

impl BatchResponse {
    pub fn ids(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.served.iter().map(|s| s.id)
    }

    pub fn cache_hits(&self) -> usize {
        self.served
            .iter()
            .filter(|s| s.source != Source::Storage)
            .count()
    }
}

/// Per-sample tier/status plus reference count, as packed metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleState {
    pub status: Source,
    pub reference_count: u8,
}

impl SampleState {
    /// 2 low bits of status, 6 bits of reference count.
    pub fn pack(&self) -> u8 {
        let status = match self.status {
            Source::Storage => 0u8,
            Source::Encoded => 1,
            Source::Decoded => 2,
            Source::Augmented => 3,
        };
        status | (self.reference_count << 2)
    }

    pub fn unpack(byte: u8) -> Self {
        let status = match byte & 0b11 {
            0 => Source::Storage,
            1 => Source::Encoded,
            2 => Source::Decoded,
            _ => Source::Augmented,
        };
        SampleState {
            status,
            reference_count: byte >> 2,
        }
    }
}

/// Per-job epoch progress snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobEpochState {
    pub consumed_count: u32,
    pub epoch_index: u64,
}

/// Total sampler metadata footprint in bytes: one seen bit per sample per
/// job plus one status/refcount byte per sample.
pub fn metadata_bytes(n_total: u64, jobs: u64) -> u64 {
    jobs * n_total.div_ceil(8) + n_total
}

/// Membership set with O(1) insert, remove, and uniform pick. Inactive
/// sets (for zero-capacity tiers) ignore inserts.
#[derive(Debug)]
struct EligibleSet {
    members: Vec<SampleId>,
    /// Position per sample id; `u32::MAX` when absent. Empty when inactive.
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl EligibleSet {
    fn inactive() -> Self {
        EligibleSet {
            members: Vec::new(),
            pos: Vec::new(),
        }
    }

    fn active(n: usize) -> Self {
        EligibleSet {
            members: Vec::new(),
            pos: vec![ABSENT; n],
        }
    }

    fn contains(&self, id: SampleId) -> bool {
        !self.pos.is_empty() && self.pos[id as usize] != ABSENT
    }

    fn insert(&mut self, id: SampleId) {
        if self.pos.is_empty() || self.pos[id as usize] != ABSENT {
            return;
        }
        self.pos[id as usize] = self.members.len() as u32;
        self.members.push(id);
    }

    fn remove(&mut self, id: SampleId) {
        if !self.contains(id) {
            return;
        }
        let p = self.pos[id as usize] as usize;
        let last = *self.members.last().expect("non-empty");
        self.members.swap_remove(p);
        if last != id {
            self.pos[last as usize] = p as u32;
        }
        self.pos[id as usize] = ABSENT;
    }

    fn clear(&mut self) {
        for &id in &self.members {
            self.pos[id as usize] = ABSENT;
        }
        self.members.clear();
    }

    fn pick<R: Rng>(&self, rng: &mut R) -> Option<SampleId> {
        if self.members.is_empty() {
            None
        } else {
            Some(self.members[rng.gen_range(0..self.members.len())])
        }
    }
}

#[derive(Debug)]
struct JobState {
    seen: BitSet,
    consumed: u32,
    epoch: u64,
    rng: ChaCha8Rng,
    /// Replacement candidates per tier: cached, unseen this epoch, and not
    /// already promised in the current batch.
    eligible: [EligibleSet; 3],
}

#[derive(Debug)]
pub struct OdsSampler {
    cache: TieredCache,
    refcount: Vec<u8>,
    jobs: Vec<JobState>,
    /// Eviction threshold in effect; snapshots the job count.
    threshold: u8,
    /// Job count waiting to become the threshold at the next epoch boundary.
    pending_threshold: Option<u8>,
    started: bool,
    maintenance_rng: ChaCha8Rng,
    seed: u64,
    /// Every eviction (maintenance and boundary purge), in order, until
    /// drained. Lets a driver track entry residencies.
    eviction_log: Vec<SampleId>,
}

impl OdsSampler {
    pub fn new(
        ds: &DatasetProfile,
        split: &PartitionSplit,
        cache_capacity: f64,
        seed: u64,
    ) -> Result<Self> {
        let cache = TieredCache::new(ds, split, cache_capacity)?;
        let n = cache.n_total() as usize;
        let mut maintenance_rng = ChaCha8Rng::seed_from_u64(seed);
        maintenance_rng.set_stream(0);
        Ok(OdsSampler {
            cache,
            refcount: vec![0; n],
            jobs: Vec::new(),
            threshold: 0,
            pending_threshold: None,
            started: false,
            maintenance_rng,
            seed,
            eviction_log: Vec::new(),
        })
    }

    /// Registers a job and returns its id. The eviction threshold tracks
    /// the job count; if batches have already been served the new count
    /// takes effect at the next epoch boundary.
    pub fn register_job(&mut self) -> Result<JobId> {
        if self.jobs.len() >= MAX_JOBS {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_JOBS} concurrent jobs are supported"
            )));
        }
        let id = self.jobs.len();
        let n = self.cache.n_total() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id as u64 + 1);
        let mut eligible = std::array::from_fn(|i| {
            if self.cache.slot_capacity(Tier::ALL[i]) > 0 {
                EligibleSet::active(n)
            } else {
                EligibleSet::inactive()
            }
        });
        // A fresh job has seen nothing: every live cached entry qualifies.
        for (i, set) in eligible.iter_mut().enumerate() {
            let tier = Tier::ALL[i];
            for &sample in self.cache.members(tier) {
                if tier != Tier::Augmented || self.alive(sample) {
                    set.insert(sample);
                }
            }
        }
        self.jobs.push(JobState {
            seen: BitSet::new(n),
            consumed: 0,
            epoch: 0,
            rng,
            eligible,
        });
        let count = self.jobs.len() as u8;
        if self.started {
            self.pending_threshold = Some(count);
        } else {
            self.threshold = count;
        }
        Ok(id)
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    pub fn cache(&self) -> &TieredCache {
        &self.cache
    }

    pub fn n_total(&self) -> u32 {
        self.cache.n_total()
    }

    pub fn sample_state(&self, id: SampleId) -> SampleState {
        let status = match self.cache.lookup(id) {
            Some(tier) => tier.into(),
            None => Source::Storage,
        };
        SampleState {
            status,
            reference_count: self.refcount[id as usize],
        }
    }

    pub fn seen(&self, job: JobId, id: SampleId) -> bool {
        self.jobs[job].seen.get(id as usize)
    }

    pub fn job_epoch_state(&self, job: JobId) -> JobEpochState {
        JobEpochState {
            consumed_count: self.jobs[job].consumed,
            epoch_index: self.jobs[job].epoch,
        }
    }

    /// All evictions since the last drain, in eviction order.
    pub fn drain_evictions(&mut self) -> Vec<SampleId> {
        std::mem::take(&mut self.eviction_log)
    }

    /// Fresh pseudo-random visit order over the whole dataset for a job's
    /// epoch, drawn from the job's seeded generator.
    pub fn epoch_permutation(&mut self, job: JobId) -> Result<Vec<SampleId>> {
        self.check_job(job)?;
        let mut ids: Vec<SampleId> = (0..self.cache.n_total()).collect();
        ids.shuffle(&mut self.jobs[job].rng);
        Ok(ids)
    }

    /// Seeds the cache with already-resident entries (warm start).
    pub fn preload(&mut self, tier: Tier, ids: &[SampleId]) -> Result<()> {
        for &id in ids {
            if !self.admit(id, tier)? {
                return Err(Error::InvalidState(format!(
                    "no free {} slot while preloading sample {id}",
                    tier.as_str()
                )));
            }
        }
        Ok(())
    }

    /// An augmented entry below the eviction threshold. Entries at the
    /// threshold are logically gone and only await maintenance.
    fn alive(&self, id: SampleId) -> bool {
        self.threshold == 0 || self.refcount[id as usize] < self.threshold
    }

    /// Admits a storage-resident sample and registers it as a replacement
    /// candidate for every job that has not seen it.
    fn admit(&mut self, id: SampleId, tier: Tier) -> Result<bool> {
        if !self.cache.admit(id, tier)? {
            return Ok(false);
        }
        self.refcount[id as usize] = 0;
        let t = tier_index(tier);
        for job in &mut self.jobs {
            if !job.seen.get(id as usize) {
                job.eligible[t].insert(id);
            }
        }
        Ok(true)
    }

    /// Evicts a cached entry, returning it to storage residency.
    fn evict(&mut self, id: SampleId) {
        self.cache.evict(id).expect("entry is cached");
        self.refcount[id as usize] = 0;
        for job in &mut self.jobs {
            for set in &mut job.eligible {
                set.remove(id);
            }
        }
        self.eviction_log.push(id);
    }

    /// Serves a batch. Requested ids must be distinct and unseen by the
    /// job this epoch. Misses are replaced by cached unseen samples where
    /// any exist (readiness order augmented, decoded, encoded; uniformly
    /// random within a tier); irreplaceable misses are fetched from
    /// storage. Seen bits are set for every served id, and reference
    /// counts are bumped for every augmented-tier serve.
    pub fn request_batch(&mut self, job: JobId, requested: &[SampleId]) -> Result<BatchResponse> {
        self.check_job(job)?;
        self.started = true;
        let n = self.cache.n_total();

        for (i, &id) in requested.iter().enumerate() {
            if id >= n {
                return Err(Error::InvalidArgument(format!(
                    "requested sample id {id} out of range (dataset has {n} samples)"
                )));
            }
            if self.jobs[job].seen.get(id as usize) {
                return Err(Error::ProtocolViolation(format!(
                    "requested sample {id} was already seen by job {job} this epoch"
                )));
            }
            if requested[..i].contains(&id) {
                return Err(Error::ProtocolViolation(format!(
                    "requested sample {id} appears twice in one batch"
                )));
            }
        }

        // Classify, and reserve requested hits before choosing any
        // replacement so a replacement can never duplicate one of them.
        // An augmented entry already at the eviction threshold is treated
        // as a miss (it is logically gone until maintenance runs).
        let mut classified: Vec<(SampleId, Option<Tier>)> = Vec::with_capacity(requested.len());
        for &id in requested {
            let hit = match self.cache.lookup(id) {
                Some(Tier::Augmented) if !self.alive(id) => None,
                other => other,
            };
            if hit.is_some() {
                self.remove_candidate(job, id);
            }
            classified.push((id, hit));
        }

        let first_epoch = self.jobs[job].epoch == 0;
        let mut served: Vec<Served> = Vec::with_capacity(requested.len());
        for (id, hit) in classified {
            match hit {
                Some(tier) => served.push(Served {
                    id,
                    source: tier.into(),
                }),
                None => match self.pick_replacement(job) {
                    Some((replacement, tier)) => {
                        served.push(Served {
                            id: replacement,
                            source: tier.into(),
                        });
                    }
                    None => {
                        // Storage fetch of the original id. During the
                        // job's first epoch, fetched samples fill free
                        // tier slots in readiness order.
                        served.push(Served {
                            id,
                            source: Source::Storage,
                        });
                        if first_epoch && self.cache.lookup(id).is_none() {
                            for tier in Tier::ALL {
                                if self.cache.has_room(tier) {
                                    self.admit(id, tier)?;
                                    break;
                                }
                            }
                        }
                        // Served this batch: not a candidate for later
                        // misses even if it was just admitted.
                        self.remove_candidate(job, id);
                    }
                },
            }
        }

        // Seen/refcount bookkeeping for everything served.
        let threshold = self.threshold;
        for &s in &served {
            let state = &mut self.jobs[job];
            let newly = state.seen.set(s.id as usize);
            debug_assert!(newly, "served an already-seen sample");
            state.consumed += 1;
            if s.source == Source::Augmented {
                let r = &mut self.refcount[s.id as usize];
                debug_assert!(*r < threshold, "served a threshold-ripe augmented entry");
                *r += 1;
                if *r >= threshold {
                    // Entry is spent; no job may be served from it again.
                    for state in &mut self.jobs {
                        state.eligible[tier_index(Tier::Augmented)].remove(s.id);
                    }
                }
            }
        }

        Ok(BatchResponse { served })
    }

    /// Uniform pick from the job's candidates, preferring tiers in
    /// readiness order. The pick is consumed (serving it will set the
    /// seen bit).
    fn pick_replacement(&mut self, job: JobId) -> Option<(SampleId, Tier)> {
        let state = &mut self.jobs[job];
        for (i, tier) in Tier::ALL.iter().enumerate() {
            if let Some(id) = state.eligible[i].pick(&mut state.rng) {
                state.eligible[i].remove(id);
                return Some((id, *tier));
            }
        }
        None
    }

    /// Drops `id` from all of a job's candidate sets (it is being served
    /// or reserved in the current batch).
    fn remove_candidate(&mut self, job: JobId, id: SampleId) {
        for set in &mut self.jobs[job].eligible {
            set.remove(id);
        }
    }

    /// Evicts every augmented entry whose reference count reached the
    /// threshold and backfills the freed slots with uniformly random
    /// storage-resident samples (reference counts reset). Idempotent.
    /// Returns the evicted ids.
    pub fn maintain(&mut self) -> Vec<SampleId> {
        if self.threshold == 0 {
            return Vec::new();
        }
        let ripe: Vec<SampleId> = self
            .cache
            .members(Tier::Augmented)
            .iter()
            .copied()
            .filter(|&id| self.refcount[id as usize] >= self.threshold)
            .collect();
        self.evict_and_refill(&ripe);
        ripe
    }

    /// Ends a job's epoch: requires the full dataset to have been consumed,
    /// clears the seen vector, and advances the epoch index. When the last
    /// job of an epoch generation finishes, augmented entries with partial
    /// reference counts are recycled so no entry outlives the epoch of its
    /// first consumer, and any pending threshold change takes effect.
    pub fn end_epoch(&mut self, job: JobId) -> Result<()> {
        self.check_job(job)?;
        let n = self.cache.n_total();
        if self.jobs[job].consumed != n {
            return Err(Error::InvalidState(format!(
                "job {job} consumed {} of {n} samples; epoch is incomplete",
                self.jobs[job].consumed
            )));
        }
        debug_assert_eq!(self.jobs[job].seen.count_ones() as u32, n);
        self.jobs[job].seen.clear();
        self.jobs[job].consumed = 0;
        self.jobs[job].epoch += 1;
        self.rebuild_candidates(job);
        let generation = self.jobs[job].epoch;
        if self.jobs.iter().all(|j| j.epoch == generation) {
            let dirty: Vec<SampleId> = self
                .cache
                .members(Tier::Augmented)
                .iter()
                .copied()
                .filter(|&id| self.refcount[id as usize] > 0)
                .collect();
            self.evict_and_refill(&dirty);
            if let Some(t) = self.pending_threshold.take() {
                self.threshold = t;
            }
        }
        Ok(())
    }

    /// After a seen-vector reset every live cached entry is a candidate
    /// again. Augmented entries that were consumed at all are excluded;
    /// they never outlive the epoch generation that first used them.
    fn rebuild_candidates(&mut self, job: JobId) {
        for (i, tier) in Tier::ALL.iter().enumerate() {
            let members = self.cache.members(*tier);
            let state = &mut self.jobs[job];
            state.eligible[i].clear();
            for &id in members {
                if *tier != Tier::Augmented || self.refcount[id as usize] == 0 {
                    state.eligible[i].insert(id);
                }
            }
        }
    }

    fn evict_and_refill(&mut self, evicted: &[SampleId]) {
        for &id in evicted {
            self.evict(id);
        }
        for _ in 0..evicted.len() {
            // Swap in fresh random samples, never re-admitting what this
            // pass just removed.
            let pick = self
                .cache
                .random_storage_resident(&mut self.maintenance_rng, evicted);
            match pick {
                Some(id) => {
                    let admitted = self.admit(id, Tier::Augmented).expect("storage-resident");
                    debug_assert!(admitted, "eviction freed a slot");
                }
                // Nothing left on storage to swap in; leave the slot free.
                None => break,
            }
        }
    }

    fn check_job(&self, job: JobId) -> Result<()> {
        if job >= self.jobs.len() {
            return Err(Error::InvalidArgument(format!(
                "unknown job id {job} ({} registered)",
                self.jobs.len()
            )));
        }
        Ok(())
    }
}

fn tier_index(tier: Tier) -> usize {
    match tier {
        Tier::Augmented => 0,
        Tier::Decoded => 1,
        Tier::Encoded => 2,
    }
}
