//! End-to-end tests of the `dsi-bench` binary: exit codes, output formats,
//! and determinism of the machine-readable records.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsi-bench"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("profiles")
        .join(name)
}

fn stdout(output: &Output) -> &str {
    std::str::from_utf8(&output.stdout).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> &str {
    std::str::from_utf8(&output.stderr).expect("utf-8 stderr")
}

/// Small profile so simulate invocations stay fast.
const SMALL_PROFILE: &str = r#"
[hardware]
t_gpu = 4550.0
t_decode_augment = 2132.0
t_augment = 4050.0
b_nic_gbit_per_s = 10.0
b_pcie_gb_per_s = 32.0
b_cache_gbit_per_s = 10.0
b_storage_mb_per_s = 500.0
cache_capacity_b = 233472000.0
nodes = 1
gpus_per_node = 2

[dataset]
n_total = 2000
s_data_kb = 114.0
inflation = 5.12

[sim]
jobs = 3
batch_size = 64
epochs = 3
seed = 5
sampler = "ods"
split = "0-0-100"
"#;

fn small_profile() -> tempfile::NamedTempFile {
    let file = tempfile::Builder::new()
        .suffix(".toml")
        .tempfile()
        .unwrap();
    std::fs::write(file.path(), SMALL_PROFILE).unwrap();
    file
}

fn stable_hit_rate(out: &str) -> f64 {
    out.lines()
        .find_map(|line| {
            line.split_whitespace()
                .find_map(|tok| tok.strip_prefix("stable_hit_rate="))
        })
        .expect("summary line present")
        .parse()
        .unwrap()
}

#[test]
fn plan_reports_all_encoded_for_large_dataset_profile() {
    let output = bin()
        .arg("plan")
        .arg(bundled("imagenet22k-azure.toml"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let out = stdout(&output);
    assert!(out.contains("best split: 100-0-0"), "{out}");
    assert!(out.contains("predicted samples/s:"), "{out}");
}

#[test]
fn plan_grid_emits_all_5151_rows() {
    let dir = tempfile::tempdir().unwrap();
    let grid_path = dir.path().join("grid.csv");
    let output = bin()
        .arg("plan")
        .arg(bundled("imagenet1k-inhouse.toml"))
        .arg("--grid")
        .arg(&grid_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let grid = std::fs::read_to_string(&grid_path).unwrap();
    let mut lines = grid.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x_encoded_pct,x_decoded_pct,x_augmented_pct,samples_per_s"
    );
    assert_eq!(lines.count(), 5151);
}

#[test]
fn malformed_unit_suffix_exits_2_and_names_the_field() {
    let file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    std::fs::write(
        file.path(),
        SMALL_PROFILE.replace("b_cache_gbit_per_s = 10.0", "b_cache_parsecs = 10.0"),
    )
    .unwrap();
    let output = bin().arg("plan").arg(file.path()).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    assert!(err.contains("hardware.b_cache_parsecs"), "{err}");
}

#[test]
fn missing_profile_exits_2() {
    let output = bin().arg("plan").arg("/nonexistent/p.toml").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    let output = bin()
        .arg("plan")
        .arg("--bogus-flag")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_identical_under_fixed_seed() {
    let file = small_profile();
    let run = || {
        bin()
            .arg("simulate")
            .arg(file.path())
            .arg("--seed")
            .arg("42")
            .output()
            .unwrap()
    };
    let a = run();
    let b = run();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed must reproduce byte-identical output");

    let other = bin()
        .arg("simulate")
        .arg(file.path())
        .arg("--seed")
        .arg("43")
        .output()
        .unwrap();
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn env_var_supplies_the_default_seed() {
    let file = small_profile();
    // Strip the profile's own seed so the env default applies.
    std::fs::write(file.path(), SMALL_PROFILE.replace("seed = 5\n", "")).unwrap();
    let via_env = bin()
        .arg("simulate")
        .arg(file.path())
        .env("DSI_BENCH_SEED", "42")
        .output()
        .unwrap();
    let via_flag = bin()
        .arg("simulate")
        .arg(file.path())
        .arg("--seed")
        .arg("42")
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(via_env.stdout, via_flag.stdout);
}

#[test]
fn simulate_ods_beats_baseline_at_partial_cache() {
    let file = small_profile();
    let run = |sampler: &str| {
        let output = bin()
            .arg("simulate")
            .arg(file.path())
            .arg("--sampler")
            .arg(sampler)
            .output()
            .unwrap();
        assert!(output.status.success());
        stable_hit_rate(stdout(&output))
    };
    let ods = run("ods");
    let baseline = run("baseline-uniform");
    assert!(
        ods > baseline,
        "ods {ods} must beat baseline {baseline} with 20% cached"
    );
    assert!((baseline - 0.2).abs() < 0.02);
}

#[test]
fn simulate_single_epoch_has_no_stable_metrics() {
    let file = small_profile();
    let output = bin()
        .arg("simulate")
        .arg(file.path())
        .arg("--epochs")
        .arg("1")
        .output()
        .unwrap();
    assert!(output.status.success());
    let out = stdout(&output);
    assert!(!out.contains("stable_hit_rate="), "{out}");
    // One record per job-epoch: 3 jobs x 1 epoch.
    assert_eq!(out.lines().filter(|l| l.starts_with("record ")).count(), 3);
}

#[test]
fn simulate_records_have_stable_field_order() {
    let file = small_profile();
    let output = bin().arg("simulate").arg(file.path()).output().unwrap();
    let out = stdout(&output);
    let records: Vec<&str> = out.lines().filter(|l| l.starts_with("record ")).collect();
    assert_eq!(records.len(), 9, "3 jobs x 3 epochs");
    let expected_fields = [
        "record", "job=", "epoch=", "delivered=", "hits_augmented=", "hits_decoded=",
        "hits_encoded=", "storage_fetches=", "hit_rate=", "decode_augment_ops=",
        "augment_ops=", "epoch_time_s=", "transcript=",
    ];
    for record in records {
        let tokens: Vec<&str> = record.split_whitespace().collect();
        assert_eq!(tokens.len(), expected_fields.len());
        for (token, field) in tokens.iter().zip(expected_fields.iter()) {
            assert!(token.starts_with(field), "{token} vs {field}");
        }
    }
}

#[test]
fn sweep_emits_one_row_per_split_size_pair() {
    let output = bin()
        .arg("sweep")
        .arg(bundled("imagenet1k-inhouse.toml"))
        .arg("--splits")
        .arg("100-0-0,0-0-100")
        .arg("--sizes")
        .arg("64,128,256,512")
        .output()
        .unwrap();
    assert!(output.status.success());
    let out = stdout(&output);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "split,dataset_gb,samples_per_s");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].starts_with("100-0-0,64,"));
    assert!(rows[7].starts_with("0-0-100,512,"));

    // Fixed-split curves never rise with dataset size on this profile.
    for chunk in rows.chunks(4) {
        let values: Vec<f64> = chunk
            .iter()
            .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        for pair in values.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "{values:?}");
        }
    }
}

#[test]
fn sweep_single_cell() {
    let output = bin()
        .arg("sweep")
        .arg(bundled("imagenet1k-inhouse.toml"))
        .arg("--splits")
        .arg("58-42-0")
        .arg("--sizes")
        .arg("142")
        .output()
        .unwrap();
    assert!(output.status.success());
    let out = stdout(&output);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().starts_with("58-42-0,142,"));
}

#[test]
fn sweep_rejects_malformed_split() {
    let output = bin()
        .arg("sweep")
        .arg(bundled("imagenet1k-inhouse.toml"))
        .arg("--splits")
        .arg("60-60-60")
        .arg("--sizes")
        .arg("64")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "usage errors exit with 2");
    assert!(stderr(&output).contains("sum to 100"));
}
