//! Deterministic epoch-level simulator: J concurrent jobs sampling batches
//! over a shared tiered cache, with either the opportunistic sampler or a
//! uniform-random no-eviction baseline.
//!
//! Jobs advance in round-robin batch steps on one logical timeline, so a
//! run is a pure function of its config (seed included). Epoch wall time is
//! accounted analytically: each delivery is classified by serving tier and
//! the per-tier counts are divided by the tier rates from the throughput
//! model. The first epoch runs against a cold cache and is reported
//! separately from the stable epochs that follow.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::cache::{SampleId, Tier, TieredCache};
use crate::error::{Error, Result};
use crate::model::{self, ModelOutput};
use crate::ods::{metadata_bytes, OdsSampler, Source, MAX_JOBS};
use crate::planner;
use crate::profile::{DatasetProfile, HardwareProfile, JobProfile, PercentSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Ods,
    BaselineUniform,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Ods => "ods",
            SamplerKind::BaselineUniform => "baseline-uniform",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ods" => Ok(SamplerKind::Ods),
            "baseline-uniform" | "baseline" => Ok(SamplerKind::BaselineUniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampler `{other}` (expected `ods` or `baseline-uniform`)"
            ))),
        }
    }
}

/// Cache split for a run: fixed, or planned from the throughput model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSpec {
    Auto,
    Fixed(PercentSplit),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub hardware: HardwareProfile,
    pub dataset: DatasetProfile,
    pub job: JobProfile,
    pub jobs: u32,
    pub split: SplitSpec,
    pub batch_size: u32,
    pub epochs: u32,
    pub seed: u64,
    pub sampler: SamplerKind,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.hardware.validate()?;
        self.dataset.validate()?;
        self.job.validate()?;
        if self.jobs < 1 {
            return Err(Error::InvalidArgument("sim.jobs must be >= 1".into()));
        }
        if self.jobs as usize > MAX_JOBS {
            return Err(Error::InvalidArgument(format!(
                "sim.jobs must be at most {MAX_JOBS}"
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("sim.batch_size must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("sim.epochs must be >= 1".into()));
        }
        if self.dataset.n_total > u32::MAX as u64 {
            return Err(Error::InvalidArgument(
                "simulator supports datasets up to u32::MAX samples".into(),
            ));
        }
        Ok(())
    }
}

/// Metrics for one job-epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct JobEpochRecord {
    pub job: u32,
    pub epoch: u32,
    pub delivered: u64,
    pub hits_augmented: u64,
    pub hits_decoded: u64,
    pub hits_encoded: u64,
    pub storage_fetches: u64,
    /// Cache hits across all partitions over samples delivered.
    pub hit_rate: f64,
    /// Preprocessing work implied by the delivery mix.
    pub decode_augment_ops: u64,
    pub augment_ops: u64,
    /// Model-derived wall time for this job's epoch.
    pub epoch_time_s: f64,
    /// Digest of the delivered (id, source) order.
    pub transcript_sha256: String,
}

impl JobEpochRecord {
    pub fn cache_hits(&self) -> u64 {
        self.hits_augmented + self.hits_decoded + self.hits_encoded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    /// The split the run actually used (resolved when `Auto`).
    pub split: PercentSplit,
    pub sampler: SamplerKind,
    pub jobs: u32,
    pub epochs: u32,
    pub seed: u64,
    /// Completion time of the cold first epoch: max across jobs.
    pub first_epoch_time_s: f64,
    /// Mean epoch time across warmed-up job-epochs, if any ran.
    pub stable_epoch_time_s: Option<f64>,
    pub first_epoch_hit_rate: f64,
    pub stable_hit_rate: Option<f64>,
    pub total_delivered: u64,
    pub total_cache_hits: u64,
    pub total_storage_fetches: u64,
    pub decode_augment_ops: u64,
    pub augment_ops: u64,
    pub metadata_bytes: u64,
    pub run_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub records: Vec<JobEpochRecord>,
    pub summary: SimSummary,
}

/// One delivered sample in a detailed transcript.
///
/// `residency` counts how many times the sample had been evicted before
/// this delivery, distinguishing cache-entry lifetimes of the same id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub job: u32,
    pub epoch: u32,
    pub id: SampleId,
    pub source: Source,
    pub residency: u32,
}

/// Preprocessing operation totals implied by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessingOps {
    /// Full decode+augment passes: storage fetches and encoded-tier hits.
    pub decode_augment: u64,
    /// Augment-only passes: decoded-tier hits.
    pub augment_only: u64,
}

/// Decode/augment work implied by the delivery mix of a finished run.
/// Augmented-tier hits are training-ready and contribute nothing.
pub fn preprocessing_ops(metrics: &SimMetrics) -> PreprocessingOps {
    PreprocessingOps {
        decode_augment: metrics.summary.decode_augment_ops,
        augment_only: metrics.summary.augment_ops,
    }
}

/// Runs one simulation.
pub fn run(config: &SimConfig) -> Result<SimMetrics> {
    Ok(run_internal(config, false)?.0)
}

/// Runs one simulation and returns the full delivery transcript alongside
/// the metrics (for invariant audits).
pub fn run_detailed(config: &SimConfig) -> Result<(SimMetrics, Vec<Delivery>)> {
    let (metrics, transcript) = run_internal(config, true)?;
    Ok((metrics, transcript.expect("requested")))
}

/// Runs every config and returns their metrics, aligned by index.
pub fn compare(configs: &[SimConfig]) -> Result<Vec<SimMetrics>> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("compare requires at least one config".into()));
    }
    configs.iter().map(run).collect()
}

fn resolve_split(config: &SimConfig) -> PercentSplit {
    match config.split {
        SplitSpec::Fixed(split) => split,
        SplitSpec::Auto => {
            planner::plan(&config.hardware, &config.dataset, &config.job).best_split
        }
    }
}

fn run_internal(config: &SimConfig, detailed: bool) -> Result<(SimMetrics, Option<Vec<Delivery>>)> {
    config.validate()?;
    let split = resolve_split(config);
    let model_out = model::evaluate(
        &config.hardware,
        &config.dataset,
        &config.job,
        &split.to_split(),
    );
    let mut driver = match config.sampler {
        SamplerKind::Ods => Driver::Ods(OdsDriver::new(config, &split)?),
        SamplerKind::BaselineUniform => Driver::Baseline(BaselineDriver::new(config, &split)?),
    };

    let n = config.dataset.n_total as u32;
    let jobs = config.jobs as usize;
    let mut records = Vec::with_capacity(jobs * config.epochs as usize);
    let mut transcript = detailed.then(Vec::new);
    let mut residency = vec![0u32; n as usize];

    for epoch in 0..config.epochs {
        driver.start_epoch()?;
        let mut accs: Vec<EpochAcc> = (0..jobs).map(|_| EpochAcc::new()).collect();
        let mut finished = 0usize;
        while finished < jobs {
            for job in 0..jobs {
                if accs[job].delivered == u64::from(n) {
                    continue;
                }
                let served = driver.step(job, config.batch_size as usize)?;
                debug_assert!(!served.is_empty(), "unfinished job produced no batch");
                for s in &served {
                    accs[job].record(s.id, s.source);
                    if let Some(t) = transcript.as_mut() {
                        t.push(Delivery {
                            job: job as u32,
                            epoch,
                            id: s.id,
                            source: s.source,
                            residency: residency[s.id as usize],
                        });
                    }
                }
                for id in driver.drain_evictions() {
                    residency[id as usize] += 1;
                }
                if accs[job].delivered == u64::from(n) {
                    finished += 1;
                }
            }
        }
        driver.end_epoch()?;
        for id in driver.drain_evictions() {
            residency[id as usize] += 1;
        }
        for (job, acc) in accs.into_iter().enumerate() {
            records.push(acc.into_record(job as u32, epoch, &model_out));
        }
    }

    let summary = summarize(config, split, &records);
    Ok((SimMetrics { records, summary }, transcript))
}

struct EpochAcc {
    delivered: u64,
    hits: [u64; 3],
    storage_fetches: u64,
    hasher: Sha256,
}

impl EpochAcc {
    fn new() -> Self {
        EpochAcc {
            delivered: 0,
            hits: [0; 3],
            storage_fetches: 0,
            hasher: Sha256::new(),
        }
    }

    fn record(&mut self, id: SampleId, source: Source) {
        self.delivered += 1;
        match source {
            Source::Augmented => self.hits[0] += 1,
            Source::Decoded => self.hits[1] += 1,
            Source::Encoded => self.hits[2] += 1,
            Source::Storage => self.storage_fetches += 1,
        }
        self.hasher.update(id.to_le_bytes());
        self.hasher.update([source as u8]);
    }

    fn into_record(self, job: u32, epoch: u32, model_out: &ModelOutput) -> JobEpochRecord {
        let [hits_augmented, hits_decoded, hits_encoded] = self.hits;
        let cache_hits = hits_augmented + hits_decoded + hits_encoded;
        debug_assert_eq!(cache_hits + self.storage_fetches, self.delivered);
        let epoch_time_s = hits_augmented as f64 / model_out.dsi_augmented.samples_per_s
            + hits_decoded as f64 / model_out.dsi_decoded.samples_per_s
            + hits_encoded as f64 / model_out.dsi_encoded.samples_per_s
            + self.storage_fetches as f64 / model_out.dsi_storage.samples_per_s;
        JobEpochRecord {
            job,
            epoch,
            delivered: self.delivered,
            hits_augmented,
            hits_decoded,
            hits_encoded,
            storage_fetches: self.storage_fetches,
            hit_rate: cache_hits as f64 / self.delivered as f64,
            decode_augment_ops: self.storage_fetches + hits_encoded,
            augment_ops: hits_decoded,
            epoch_time_s,
            transcript_sha256: hex(&self.hasher.finalize()),
        }
    }
}

fn summarize(config: &SimConfig, split: PercentSplit, records: &[JobEpochRecord]) -> SimSummary {
    let first: Vec<&JobEpochRecord> = records.iter().filter(|r| r.epoch == 0).collect();
    let stable: Vec<&JobEpochRecord> = records.iter().filter(|r| r.epoch > 0).collect();
    let mean =
        |xs: &[&JobEpochRecord], f: fn(&JobEpochRecord) -> f64| -> f64 {
            xs.iter().map(|r| f(r)).sum::<f64>() / xs.len() as f64
        };
    let mut run_hasher = Sha256::new();
    for r in records {
        run_hasher.update(r.transcript_sha256.as_bytes());
    }
    SimSummary {
        split,
        sampler: config.sampler,
        jobs: config.jobs,
        epochs: config.epochs,
        seed: config.seed,
        first_epoch_time_s: first
            .iter()
            .map(|r| r.epoch_time_s)
            .fold(0.0, f64::max),
        stable_epoch_time_s: (!stable.is_empty()).then(|| mean(&stable, |r| r.epoch_time_s)),
        first_epoch_hit_rate: mean(&first, |r| r.hit_rate),
        stable_hit_rate: (!stable.is_empty()).then(|| mean(&stable, |r| r.hit_rate)),
        total_delivered: records.iter().map(|r| r.delivered).sum(),
        total_cache_hits: records.iter().map(|r| r.cache_hits()).sum(),
        total_storage_fetches: records.iter().map(|r| r.storage_fetches).sum(),
        decode_augment_ops: records.iter().map(|r| r.decode_augment_ops).sum(),
        augment_ops: records.iter().map(|r| r.augment_ops).sum(),
        metadata_bytes: metadata_bytes(config.dataset.n_total, u64::from(config.jobs)),
        run_sha256: hex(&run_hasher.finalize()),
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

enum Driver {
    Ods(OdsDriver),
    Baseline(BaselineDriver),
}

impl Driver {
    fn start_epoch(&mut self) -> Result<()> {
        match self {
            Driver::Ods(d) => d.start_epoch(),
            Driver::Baseline(d) => d.start_epoch(),
        }
    }

    fn step(&mut self, job: usize, batch: usize) -> Result<Vec<crate::ods::Served>> {
        match self {
            Driver::Ods(d) => d.step(job, batch),
            Driver::Baseline(d) => Ok(d.step(job, batch)),
        }
    }

    fn end_epoch(&mut self) -> Result<()> {
        match self {
            Driver::Ods(d) => d.end_epoch(),
            Driver::Baseline(_) => Ok(()),
        }
    }

    fn drain_evictions(&mut self) -> Vec<SampleId> {
        match self {
            Driver::Ods(d) => d.sampler.drain_evictions(),
            Driver::Baseline(_) => Vec::new(),
        }
    }
}

/// Per-job request stream: a seeded epoch permutation consumed in order,
/// skipping ids that replacements already delivered, plus a retry queue
/// for misses whose slots were given to replacements.
struct RequestStream {
    perm: Vec<SampleId>,
    cursor: usize,
    deferred: VecDeque<SampleId>,
}

impl RequestStream {
    fn next_batch(&mut self, k: usize, is_seen: impl Fn(SampleId) -> bool) -> Vec<SampleId> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.cursor < self.perm.len() {
                let id = self.perm[self.cursor];
                self.cursor += 1;
                if !is_seen(id) {
                    out.push(id);
                }
            } else if let Some(id) = self.deferred.pop_front() {
                if !is_seen(id) {
                    out.push(id);
                }
            } else {
                break;
            }
        }
        out
    }
}

struct OdsDriver {
    sampler: OdsSampler,
    streams: Vec<RequestStream>,
}

impl OdsDriver {
    fn new(config: &SimConfig, split: &PercentSplit) -> Result<Self> {
        let mut sampler = OdsSampler::new(
            &config.dataset,
            &split.to_split(),
            config.hardware.cache_capacity,
            config.seed,
        )?;
        for _ in 0..config.jobs {
            sampler.register_job()?;
        }
        Ok(OdsDriver {
            sampler,
            streams: Vec::new(),
        })
    }

    fn start_epoch(&mut self) -> Result<()> {
        self.streams.clear();
        for job in 0..self.sampler.job_count() {
            self.streams.push(RequestStream {
                perm: self.sampler.epoch_permutation(job)?,
                cursor: 0,
                deferred: VecDeque::new(),
            });
        }
        Ok(())
    }

    fn step(&mut self, job: usize, batch: usize) -> Result<Vec<crate::ods::Served>> {
        let sampler = &self.sampler;
        let request = self.streams[job].next_batch(batch, |id| sampler.seen(job, id));
        if request.is_empty() {
            return Ok(Vec::new());
        }
        let response = self.sampler.request_batch(job, &request)?;
        // Misses whose slots went to replacements are still unseen; retry
        // them later in the epoch.
        for &id in &request {
            if !self.sampler.seen(job, id) {
                self.streams[job].deferred.push_back(id);
            }
        }
        self.sampler.maintain();
        Ok(response.served)
    }

    fn end_epoch(&mut self) -> Result<()> {
        for job in 0..self.sampler.job_count() {
            self.sampler.end_epoch(job)?;
        }
        Ok(())
    }
}

/// Uniform random sampling without replacement over a no-eviction cache:
/// fetched samples are admitted while any tier has room and then stay put,
/// and requests are never rewritten toward cache contents.
struct BaselineDriver {
    cache: TieredCache,
    rngs: Vec<ChaCha8Rng>,
    perms: Vec<Vec<SampleId>>,
    cursors: Vec<usize>,
}

impl BaselineDriver {
    fn new(config: &SimConfig, split: &PercentSplit) -> Result<Self> {
        let cache = TieredCache::new(
            &config.dataset,
            &split.to_split(),
            config.hardware.cache_capacity,
        )?;
        let rngs = (0..config.jobs)
            .map(|job| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(u64::from(job) + 1);
                rng
            })
            .collect();
        Ok(BaselineDriver {
            cache,
            rngs,
            perms: Vec::new(),
            cursors: Vec::new(),
        })
    }

    fn start_epoch(&mut self) -> Result<()> {
        self.perms.clear();
        self.cursors.clear();
        for rng in &mut self.rngs {
            let mut ids: Vec<SampleId> = (0..self.cache.n_total()).collect();
            ids.shuffle(rng);
            self.perms.push(ids);
            self.cursors.push(0);
        }
        Ok(())
    }

    fn step(&mut self, job: usize, batch: usize) -> Vec<crate::ods::Served> {
        let perm = &self.perms[job];
        let cursor = &mut self.cursors[job];
        let end = (*cursor + batch).min(perm.len());
        let mut served = Vec::with_capacity(end - *cursor);
        for &id in &perm[*cursor..end] {
            match self.cache.lookup(id) {
                Some(tier) => served.push(crate::ods::Served {
                    id,
                    source: tier.into(),
                }),
                None => {
                    served.push(crate::ods::Served {
                        id,
                        source: Source::Storage,
                    });
                    for tier in Tier::ALL {
                        if self.cache.has_room(tier) {
                            self.cache.admit(id, tier).expect("uncached sample admits");
                            break;
                        }
                    }
                }
            }
        }
        *cursor = end;
        served
    }
}
