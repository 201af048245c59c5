//! `dsi-bench`: plan cache splits, simulate multi-job sampling, and sweep
//! dataset sizes for a profiled data storage and ingestion pipeline.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsi_bench::config::{self, Profile};
use dsi_bench::error::Error;
use dsi_bench::planner;
use dsi_bench::profile::PercentSplit;
use dsi_bench::sim::{self, SamplerKind, SimConfig, SimMetrics, SplitSpec};

const SEED_ENV: &str = "DSI_BENCH_SEED";

#[derive(Parser)]
#[command(
    name = "dsi-bench",
    about = "Throughput modeling, cache-split planning, and sampling simulation for ML input pipelines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the cache split maximizing modeled pipeline throughput.
    Plan(PlanArgs),
    /// Run the multi-job sampling simulator and report metrics.
    Simulate(SimulateArgs),
    /// Evaluate fixed splits across dataset sizes (CSV for plotting).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Profile file (TOML).
    profile: PathBuf,
    /// Write the full evaluated grid as CSV to this path (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Profile file (TOML).
    profile: PathBuf,
    /// Concurrent jobs sharing the dataset.
    #[arg(long)]
    jobs: Option<u32>,
    /// Epochs per job.
    #[arg(long)]
    epochs: Option<u32>,
    /// Batch size per request.
    #[arg(long)]
    batch_size: Option<u32>,
    /// RNG seed (overrides profile and DSI_BENCH_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling policy: `ods` or `baseline-uniform`.
    #[arg(long)]
    sampler: Option<String>,
    /// Cache split `E-D-A` in percent, or `auto` to plan it.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Profile file (TOML).
    profile: PathBuf,
    /// Comma-separated splits, e.g. `100-0-0,0-0-100`.
    #[arg(long, value_delimiter = ',', required = true)]
    splits: Vec<String>,
    /// Comma-separated dataset sizes in GB, e.g. `64,128,256,512`.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<f64>,
}

/// Exit contract: 0 success, 1 runtime failure, 2 usage/parse error.
struct Failure {
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = if err.is_usage() { 2 } else { 1 };
        Failure {
            message: err.to_string(),
            code,
        }
    }
}

/// Marks an error as a command-line usage problem.
fn usage(err: Error) -> Failure {
    Failure {
        message: err.to_string(),
        code: 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_plan(args: PlanArgs) -> Result<(), Failure> {
    let profile = config::load_profile(&args.profile)?;
    let want_grid = args.grid.is_some();
    let result = if want_grid {
        planner::plan_with_grid(&profile.hardware, &profile.dataset, &profile.job)
    } else {
        planner::plan(&profile.hardware, &profile.dataset, &profile.job)
    };
    println!("best split: {}", result.best_split);
    println!("predicted samples/s: {:.6}", result.predicted_throughput);
    if let Some(path) = args.grid {
        let grid = result.grid.expect("grid requested");
        let mut csv = String::from("x_encoded_pct,x_decoded_pct,x_augmented_pct,samples_per_s\n");
        for (split, throughput) in grid {
            csv.push_str(&format!(
                "{},{},{},{:.6}\n",
                split.encoded, split.decoded, split.augmented, throughput
            ));
        }
        write_output(&path, &csv)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let profile = config::load_profile(&args.profile)?;
    let config = build_sim_config(&profile, &args)?;
    let metrics = sim::run(&config)?;
    print_simulation_report(&config, &metrics);
    Ok(())
}

fn build_sim_config(profile: &Profile, args: &SimulateArgs) -> Result<SimConfig, Failure> {
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(text) => Some(text.parse::<u64>().map_err(|_| {
            usage(Error::InvalidArgument(format!(
                "{SEED_ENV} must be an unsigned integer, got `{text}`"
            )))
        })?),
        Err(_) => None,
    };
    let mut config = profile.sim_config(0);
    config.seed = args
        .seed
        .or(env_seed)
        .or(profile.sim.seed)
        .unwrap_or(config.seed);
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(batch_size) = args.batch_size {
        config.batch_size = batch_size;
    }
    if let Some(sampler) = &args.sampler {
        config.sampler = sampler.parse::<SamplerKind>().map_err(usage)?;
    }
    if let Some(split) = &args.split {
        config.split = match split.as_str() {
            "auto" => SplitSpec::Auto,
            text => SplitSpec::Fixed(text.parse::<PercentSplit>().map_err(usage)?),
        };
    }
    Ok(config)
}

fn print_simulation_report(config: &SimConfig, metrics: &SimMetrics) {
    let s = &metrics.summary;
    println!(
        "simulation: sampler={} jobs={} epochs={} batch_size={} seed={} split={}",
        s.sampler.as_str(),
        s.jobs,
        s.epochs,
        config.batch_size,
        s.seed,
        s.split
    );
    println!(
        "{:>4} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>14}",
        "job", "epoch", "delivered", "aug_hits", "dec_hits", "enc_hits", "storage", "hit_rate", "epoch_time_s"
    );
    for r in &metrics.records {
        println!(
            "{:>4} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9.6} {:>14.6}",
            r.job,
            r.epoch,
            r.delivered,
            r.hits_augmented,
            r.hits_decoded,
            r.hits_encoded,
            r.storage_fetches,
            r.hit_rate,
            r.epoch_time_s
        );
    }
    print!(
        "summary: first_epoch_time_s={:.6} first_hit_rate={:.6}",
        s.first_epoch_time_s, s.first_epoch_hit_rate
    );
    match (s.stable_epoch_time_s, s.stable_hit_rate) {
        (Some(time), Some(rate)) => {
            println!(" stable_epoch_time_s={time:.6} stable_hit_rate={rate:.6}")
        }
        _ => println!(),
    }
    println!(
        "summary: decode_augment_ops={} augment_ops={} metadata_bytes={} run_digest={}",
        s.decode_augment_ops, s.augment_ops, s.metadata_bytes, s.run_sha256
    );
    // Machine-readable block: one record per job-epoch, stable field order.
    for r in &metrics.records {
        println!(
            "record job={} epoch={} delivered={} hits_augmented={} hits_decoded={} hits_encoded={} storage_fetches={} hit_rate={:.6} decode_augment_ops={} augment_ops={} epoch_time_s={:.6} transcript={}",
            r.job,
            r.epoch,
            r.delivered,
            r.hits_augmented,
            r.hits_decoded,
            r.hits_encoded,
            r.storage_fetches,
            r.hit_rate,
            r.decode_augment_ops,
            r.augment_ops,
            r.epoch_time_s,
            r.transcript_sha256
        );
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let profile = config::load_profile(&args.profile)?;
    let splits: Vec<PercentSplit> = args
        .splits
        .iter()
        .map(|s| s.parse().map_err(usage))
        .collect::<Result<_, _>>()?;
    let sizes: Vec<u64> = args
        .sizes
        .iter()
        .map(|&gb| {
            if !(gb > 0.0) {
                return Err(usage(Error::InvalidArgument(format!(
                    "sweep sizes must be positive GB values, got {gb}"
                ))));
            }
            Ok((gb * 1e9 / profile.dataset.s_data).floor().max(1.0) as u64)
        })
        .collect::<Result<_, _>>()?;
    let cells = planner::sweep(
        &profile.hardware,
        &profile.dataset,
        &profile.job,
        &splits,
        &sizes,
    )?;
    let mut out = String::from("split,dataset_gb,samples_per_s\n");
    for (cell, &gb) in cells.iter().zip(args.sizes.iter().cycle()) {
        out.push_str(&format!("{},{},{:.6}\n", cell.split, gb, cell.samples_per_s));
    }
    print!("{out}");
    Ok(())
}

fn write_output(path: &PathBuf, content: &str) -> Result<(), Failure> {
    if path.as_os_str() == "-" {
        print!("{content}");
        return Ok(());
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
