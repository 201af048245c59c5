//! Profile documents: TOML files with `hardware`, `dataset`, `job`, and
//! `sim` sections.
//!
//! Physical quantities carry their unit in the key name (`b_nic_gbit_per_s`,
//! `cache_capacity_gb`, `s_data_kb`, ...), and any listed unit is accepted
//! for a field. Parsing is strict: unknown keys and missing required keys
//! are rejected with the full key path so profile typos cannot silently
//! change a run.

use std::collections::HashSet;
use std::path::Path;

use toml::value::{Table, Value};

use crate::error::{Error, Result};
use crate::profile::{DatasetProfile, HardwareProfile, JobProfile, PercentSplit};
use crate::sim::{SamplerKind, SimConfig, SplitSpec};
use crate::units;

/// A fully parsed profile document.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub hardware: HardwareProfile,
    pub dataset: DatasetProfile,
    pub job: JobProfile,
    pub sim: SimSettings,
}

/// Simulation defaults carried by the profile; CLI flags override these.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub jobs: u32,
    pub batch_size: u32,
    pub epochs: u32,
    pub seed: Option<u64>,
    pub sampler: SamplerKind,
    pub split: SplitSpec,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            jobs: 1,
            batch_size: 256,
            epochs: 2,
            seed: None,
            sampler: SamplerKind::Ods,
            split: SplitSpec::Auto,
        }
    }
}

impl Profile {
    /// Assembles a runnable simulator config, applying the default seed
    /// when the profile does not pin one.
    pub fn sim_config(&self, default_seed: u64) -> SimConfig {
        SimConfig {
            hardware: self.hardware.clone(),
            dataset: self.dataset.clone(),
            job: self.job,
            jobs: self.sim.jobs,
            split: self.sim.split,
            batch_size: self.sim.batch_size,
            epochs: self.sim.epochs,
            seed: self.sim.seed.unwrap_or(default_seed),
            sampler: self.sim.sampler,
        }
    }
}

type UnitFn = fn(f64) -> f64;

const BANDWIDTH_UNITS: &[(&str, UnitFn)] = &[
    ("b_per_s", |v| v),
    ("kb_per_s", units::kb),
    ("mb_per_s", units::mb),
    ("gb_per_s", units::gb),
    ("kbit_per_s", units::kbit_per_s),
    ("mbit_per_s", units::mbit_per_s),
    ("gbit_per_s", units::gbit_per_s),
];

const SIZE_UNITS: &[(&str, UnitFn)] = &[
    ("b", |v| v),
    ("kb", units::kb),
    ("mb", units::mb),
    ("gb", units::gb),
    ("tb", units::tb),
];

pub fn load_profile(path: &Path) -> Result<Profile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::profile(path.display().to_string(), e.to_string()))?;
    parse_profile(&text)
}

pub fn parse_profile(text: &str) -> Result<Profile> {
    let root: Table =
        toml::from_str(text).map_err(|e| Error::profile("<document>", e.to_string()))?;
    for key in root.keys() {
        if !matches!(key.as_str(), "hardware" | "dataset" | "job" | "sim") {
            return Err(Error::profile(key, "unknown section"));
        }
    }

    let hardware = parse_hardware(section(&root, "hardware")?.ok_or_else(|| {
        Error::profile("hardware", "missing required section")
    })?)?;
    let dataset = parse_dataset(section(&root, "dataset")?.ok_or_else(|| {
        Error::profile("dataset", "missing required section")
    })?)?;
    let job = match section(&root, "job")? {
        Some(table) => parse_job(table)?,
        None => JobProfile::default(),
    };
    let sim = match section(&root, "sim")? {
        Some(table) => parse_sim(table)?,
        None => SimSettings::default(),
    };

    hardware
        .validate()
        .map_err(|e| Error::profile("hardware", e.to_string()))?;
    dataset
        .validate()
        .map_err(|e| Error::profile("dataset", e.to_string()))?;
    job.validate()
        .map_err(|e| Error::profile("job", e.to_string()))?;

    Ok(Profile {
        hardware,
        dataset,
        job,
        sim,
    })
}

/// Canonical serialization (bytes and bytes/second keys). Parsing the
/// output reproduces the profile exactly.
pub fn serialize_profile(profile: &Profile) -> String {
    let mut root = Table::new();

    let mut hw = Table::new();
    let h = &profile.hardware;
    hw.insert("t_gpu".into(), Value::Float(h.t_gpu));
    hw.insert("t_decode_augment".into(), Value::Float(h.t_decode_augment));
    hw.insert("t_augment".into(), Value::Float(h.t_augment));
    hw.insert("b_nic_b_per_s".into(), Value::Float(h.b_nic));
    hw.insert("b_pcie_b_per_s".into(), Value::Float(h.b_pcie));
    hw.insert("b_cache_b_per_s".into(), Value::Float(h.b_cache));
    hw.insert("b_storage_b_per_s".into(), Value::Float(h.b_storage));
    hw.insert("cache_capacity_b".into(), Value::Float(h.cache_capacity));
    hw.insert("nodes".into(), Value::Integer(i64::from(h.nodes)));
    hw.insert(
        "gpus_per_node".into(),
        Value::Integer(i64::from(h.gpus_per_node)),
    );
    hw.insert("nvlink_intra".into(), Value::Boolean(h.nvlink_intra));
    hw.insert("nvlink_inter".into(), Value::Boolean(h.nvlink_inter));
    hw.insert(
        "comm_participant_mapping".into(),
        Value::String(h.comm_mapping.as_str().into()),
    );
    root.insert("hardware".into(), Value::Table(hw));

    let mut ds = Table::new();
    let d = &profile.dataset;
    ds.insert("n_total".into(), Value::Integer(d.n_total as i64));
    ds.insert("s_data_b".into(), Value::Float(d.s_data));
    ds.insert("inflation".into(), Value::Float(d.inflation));
    root.insert("dataset".into(), Value::Table(ds));

    let mut job = Table::new();
    job.insert("model_size_b".into(), Value::Float(profile.job.model_size));
    root.insert("job".into(), Value::Table(job));

    let mut sim = Table::new();
    let s = &profile.sim;
    sim.insert("jobs".into(), Value::Integer(i64::from(s.jobs)));
    sim.insert("batch_size".into(), Value::Integer(i64::from(s.batch_size)));
    sim.insert("epochs".into(), Value::Integer(i64::from(s.epochs)));
    if let Some(seed) = s.seed {
        sim.insert("seed".into(), Value::Integer(seed as i64));
    }
    sim.insert("sampler".into(), Value::String(s.sampler.as_str().into()));
    let split = match s.split {
        SplitSpec::Auto => "auto".to_string(),
        SplitSpec::Fixed(p) => p.to_string(),
    };
    sim.insert("split".into(), Value::String(split));
    root.insert("sim".into(), Value::Table(sim));

    toml::to_string(&Value::Table(root)).expect("profile tables serialize")
}

fn section<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::profile(name, "expected a table section")),
    }
}

/// Tracks which keys of a section were consumed so leftovers can be
/// reported as unknown, with the section-qualified path.
struct Section<'a> {
    name: &'a str,
    table: &'a Table,
    used: HashSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, table: &'a Table) -> Self {
        Section {
            name,
            table,
            used: HashSet::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn take(&mut self, key: &'a str) -> Option<&'a Value> {
        let value = self.table.get(key);
        if value.is_some() {
            self.used.insert(key);
        }
        value
    }

    fn float(&mut self, key: &'a str) -> Result<f64> {
        match self.take(key) {
            Some(v) => as_float(v).ok_or_else(|| Error::profile(self.path(key), "expected a number")),
            None => Err(Error::profile(self.path(key), "missing required key")),
        }
    }

    fn uint(&mut self, key: &'a str, default: Option<u32>) -> Result<u32> {
        match self.take(key) {
            Some(Value::Integer(i)) if *i >= 0 && *i <= i64::from(u32::MAX) => Ok(*i as u32),
            Some(_) => Err(Error::profile(
                self.path(key),
                "expected a non-negative integer",
            )),
            None => default.ok_or_else(|| Error::profile(self.path(key), "missing required key")),
        }
    }

    fn boolean(&mut self, key: &'a str, default: bool) -> Result<bool> {
        match self.take(key) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(Error::profile(self.path(key), "expected a boolean")),
            None => Ok(default),
        }
    }

    fn string(&mut self, key: &'a str) -> Result<Option<&'a str>> {
        match self.take(key) {
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(Error::profile(self.path(key), "expected a string")),
            None => Ok(None),
        }
    }

    /// A value given under exactly one unit-suffixed key, e.g. `b_nic`
    /// accepting `b_nic_gbit_per_s` or `b_nic_b_per_s`. Converted to
    /// canonical units by the matched suffix.
    fn suffixed(&mut self, base: &str, unit_table: &[(&str, UnitFn)]) -> Result<f64> {
        let mut found: Option<(String, f64)> = None;
        for key in self.table.keys() {
            let Some(rest) = key.strip_prefix(base) else {
                continue;
            };
            let Some(suffix) = rest.strip_prefix('_') else {
                continue;
            };
            let Some((_, convert)) = unit_table.iter().find(|(s, _)| *s == suffix) else {
                return Err(Error::profile(
                    self.path(key),
                    format!(
                        "unknown unit suffix `{suffix}` for `{base}` (accepted: {})",
                        suffix_list(unit_table)
                    ),
                ));
            };
            let raw = as_float(self.table.get(key).expect("key exists"))
                .ok_or_else(|| Error::profile(self.path(key), "expected a number"))?;
            if let Some((prev, _)) = &found {
                return Err(Error::profile(
                    self.path(key),
                    format!("`{base}` is already set by `{prev}`"),
                ));
            }
            // Borrow gymnastics: record the key as used via its own slice.
            let owned_key = key.as_str();
            self.used.insert(owned_key);
            found = Some((key.clone(), convert(raw)));
        }
        match found {
            Some((_, value)) => Ok(value),
            None => Err(Error::profile(
                self.path(base),
                format!(
                    "missing required key (expected `{base}_<unit>` with unit one of: {})",
                    suffix_list(unit_table)
                ),
            )),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.table.keys() {
            if !self.used.contains(key.as_str()) {
                return Err(Error::profile(self.path(key), "unknown key"));
            }
        }
        Ok(())
    }
}

fn suffix_list(unit_table: &[(&str, UnitFn)]) -> String {
    unit_table
        .iter()
        .map(|(s, _)| *s)
        .collect::<Vec<_>>()
        .join(", ")
}

fn as_float(value: &Value) -> Option<f64> {
    match value {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn parse_hardware(table: &Table) -> Result<HardwareProfile> {
    let mut s = Section::new("hardware", table);
    let hw = HardwareProfile {
        t_gpu: s.float("t_gpu")?,
        t_decode_augment: s.float("t_decode_augment")?,
        t_augment: s.float("t_augment")?,
        b_nic: s.suffixed("b_nic", BANDWIDTH_UNITS)?,
        b_pcie: s.suffixed("b_pcie", BANDWIDTH_UNITS)?,
        b_cache: s.suffixed("b_cache", BANDWIDTH_UNITS)?,
        b_storage: s.suffixed("b_storage", BANDWIDTH_UNITS)?,
        cache_capacity: s.suffixed("cache_capacity", SIZE_UNITS)?,
        nodes: s.uint("nodes", None)?,
        gpus_per_node: s.uint("gpus_per_node", None)?,
        nvlink_intra: s.boolean("nvlink_intra", false)?,
        nvlink_inter: s.boolean("nvlink_inter", false)?,
        comm_mapping: match s.string("comm_participant_mapping")? {
            Some(text) => text
                .parse()
                .map_err(|e: Error| Error::profile("hardware.comm_participant_mapping", e.to_string()))?,
            None => Default::default(),
        },
    };
    s.finish()?;
    Ok(hw)
}

fn parse_dataset(table: &Table) -> Result<DatasetProfile> {
    let mut s = Section::new("dataset", table);
    let n_total = match s.take("n_total") {
        Some(Value::Integer(i)) if *i >= 1 => *i as u64,
        Some(_) => {
            return Err(Error::profile("dataset.n_total", "expected a positive integer"))
        }
        None => return Err(Error::profile("dataset.n_total", "missing required key")),
    };
    let ds = DatasetProfile {
        n_total,
        s_data: s.suffixed("s_data", SIZE_UNITS)?,
        inflation: s.float("inflation")?,
    };
    s.finish()?;
    Ok(ds)
}

fn parse_job(table: &Table) -> Result<JobProfile> {
    let mut s = Section::new("job", table);
    let job = JobProfile {
        model_size: s.suffixed("model_size", SIZE_UNITS)?,
    };
    s.finish()?;
    Ok(job)
}

fn parse_sim(table: &Table) -> Result<SimSettings> {
    let mut s = Section::new("sim", table);
    let defaults = SimSettings::default();
    let seed = match s.take("seed") {
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(_) => return Err(Error::profile("sim.seed", "expected a non-negative integer")),
        None => None,
    };
    let sampler = match s.string("sampler")? {
        Some(text) => text
            .parse()
            .map_err(|e: Error| Error::profile("sim.sampler", e.to_string()))?,
        None => defaults.sampler,
    };
    let split = match s.string("split")? {
        Some("auto") | None => SplitSpec::Auto,
        Some(text) => SplitSpec::Fixed(
            text.parse::<PercentSplit>()
                .map_err(|e| Error::profile("sim.split", e.to_string()))?,
        ),
    };
    let sim = SimSettings {
        jobs: s.uint("jobs", Some(defaults.jobs))?,
        batch_size: s.uint("batch_size", Some(defaults.batch_size))?,
        epochs: s.uint("epochs", Some(defaults.epochs))?,
        seed,
        sampler,
        split,
    };
    s.finish()?;
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    const MINIMAL: &str = r#"
[hardware]
t_gpu = 4550.0
t_decode_augment = 2132.0
t_augment = 4050.0
b_nic_gbit_per_s = 10.0
b_pcie_gb_per_s = 32.0
b_cache_gbit_per_s = 10.0
b_storage_mb_per_s = 500.0
cache_capacity_gb = 64.0
nodes = 1
gpus_per_node = 2

[dataset]
n_total = 1300000
s_data_kb = 114.0
inflation = 5.12
"#;

    #[test]
    fn parses_minimal_profile_with_defaults() {
        let profile = parse_profile(MINIMAL).unwrap();
        assert_eq!(profile.hardware.b_nic, 1.25e9);
        assert_eq!(profile.hardware.b_storage, 5e8);
        assert_eq!(profile.hardware.cache_capacity, 6.4e10);
        assert_eq!(profile.dataset.s_data, 114_000.0);
        assert_eq!(profile.job.model_size, 0.0);
        assert_eq!(profile.sim, SimSettings::default());
        assert!(!profile.hardware.nvlink_intra);
    }

    #[test]
    fn bundled_profiles_match_presets() {
        for (file, preset) in [
            ("imagenet1k-inhouse.toml", presets::inhouse_imagenet1k()),
            ("imagenet22k-azure.toml", presets::azure_imagenet22k()),
        ] {
            let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("profiles")
                .join(file);
            let profile = load_profile(&path).unwrap();
            let (hw, ds) = preset;
            assert_eq!(profile.hardware, hw, "{file} hardware drifted");
            assert_eq!(profile.dataset, ds, "{file} dataset drifted");
            assert_eq!(profile.job.model_size, 0.0);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let original = parse_profile(MINIMAL).unwrap();
        let text = serialize_profile(&original);
        let reparsed = parse_profile(&text).unwrap();
        assert_eq!(original, reparsed);
    }

    #[test]
    fn equivalent_units_give_identical_profiles() {
        let gbit = parse_profile(MINIMAL).unwrap();
        let bytes = parse_profile(&MINIMAL.replace(
            "b_nic_gbit_per_s = 10.0",
            "b_nic_b_per_s = 1250000000.0",
        ))
        .unwrap();
        assert_eq!(gbit, bytes);
    }

    #[test]
    fn unknown_key_names_the_path() {
        let text = MINIMAL.replace("nodes = 1", "nodes = 1\nnoddes = 2");
        let err = parse_profile(&text).unwrap_err();
        assert!(matches!(&err, Error::Profile { path, .. } if path == "hardware.noddes"));
    }

    #[test]
    fn malformed_unit_suffix_names_the_field() {
        let text = MINIMAL.replace("b_storage_mb_per_s = 500.0", "b_storage_pb_per_s = 500.0");
        let err = parse_profile(&text).unwrap_err();
        match err {
            Error::Profile { path, message } => {
                assert_eq!(path, "hardware.b_storage_pb_per_s");
                assert!(message.contains("unknown unit suffix"), "{message}");
            }
            other => panic!("expected profile error, got {other:?}"),
        }
    }

    #[test]
    fn missing_key_lists_accepted_units() {
        let text = MINIMAL.replace("b_storage_mb_per_s = 500.0\n", "");
        let err = parse_profile(&text).unwrap_err();
        match err {
            Error::Profile { path, message } => {
                assert_eq!(path, "hardware.b_storage");
                assert!(message.contains("gbit_per_s"), "{message}");
            }
            other => panic!("expected profile error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_unit_keys_are_rejected() {
        let text = MINIMAL.replace(
            "b_nic_gbit_per_s = 10.0",
            "b_nic_gbit_per_s = 10.0\nb_nic_mb_per_s = 1250.0",
        );
        let err = parse_profile(&text).unwrap_err();
        assert!(matches!(&err, Error::Profile { path, .. } if path.starts_with("hardware.b_nic")));
    }

    #[test]
    fn sim_section_parses_fixed_split_and_sampler() {
        let text = format!(
            "{MINIMAL}\n[sim]\njobs = 3\nbatch_size = 128\nepochs = 4\nseed = 99\nsampler = \"baseline-uniform\"\nsplit = \"58-42-0\"\n"
        );
        let profile = parse_profile(&text).unwrap();
        assert_eq!(profile.sim.jobs, 3);
        assert_eq!(profile.sim.seed, Some(99));
        assert_eq!(profile.sim.sampler, SamplerKind::BaselineUniform);
        assert_eq!(
            profile.sim.split,
            SplitSpec::Fixed(PercentSplit::new(58, 42, 0).unwrap())
        );
        let bad = format!("{MINIMAL}\n[sim]\nsplit = \"58-42-5\"\n");
        assert!(parse_profile(&bad).is_err());
    }

    #[test]
    fn invariant_violations_surface_as_profile_errors() {
        let text = MINIMAL.replace("t_gpu = 4550.0", "t_gpu = 0.0");
        let err = parse_profile(&text).unwrap_err();
        assert!(matches!(&err, Error::Profile { path, .. } if path == "hardware"));
    }
}
