//! Subcommands and their exit codes: 0 on success, 2 for bad input
//! (arguments, config or dataset), 3 when a run fails after its inputs were
//! accepted.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mvactive_core::active_learning::Strategy;
use mvactive_core::analysis::{cluster_entropy, cost_report};
use mvactive_core::campaign::{run_campaign, CampaignConfig};
use mvactive_core::self_training::summarize;
use mvactive_core::synthetic::{generate_synthetic, SyntheticSpec};

use crate::config::{load_config, resolve};
use crate::dataset_io::{load_dataset, save_dataset};
use crate::exec::Rayon;
use crate::report::{diagnostics_path, parse_diagnostics, parse_pseudo_lines, read, selections_path, write_run};

#[derive(Debug, Parser)]
#[command(name = "mvactive", version, about = "Multi-view active-learning campaigns for 3D pose estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic dataset.
    Generate {
        /// Synthetic dataset parameters (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a campaign for one or more seeds and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; overrides the config.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's strategy.
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Worker threads for per-frame work; 0 picks automatically.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Cluster entropy and pseudo-label drift per iteration of a run
    /// directory; also written to `analysis.csv` there.
    Analyze {
        /// Run directory written by `run`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Annotation-cost table for a config's schedule.
    Report {
        /// Campaign config; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name), runs, and reports failures on
/// standard error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

pub fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, seed, out } => generate(config.as_deref(), seed, &out),
        Command::Run { config, seed, out, strategy, threads } => run(&config, seed, &out, strategy, threads),
        Command::Analyze { out } => analyze(&out),
        Command::Report { config, out } => cost_table(config.as_deref(), out.as_deref()),
    }
}

fn generate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut spec = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| input(format_args!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<SyntheticSpec>(&text).map_err(|e| input(format_args!("malformed {}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let dataset = generate_synthetic(&spec).map_err(input)?;
    save_dataset(&dataset, out).map_err(runtime)
}

fn run(config_path: &Path, seeds: Option<Vec<u64>>, out: &Path, strategy: Option<Strategy>, threads: usize) -> Result<(), Failure> {
    let mut config = load_config(config_path).map_err(input)?;
    let dataset_path = PathBuf::from(&config.dataset);
    let dataset = load_dataset(&dataset_path).map_err(input)?;
    if let Some(seeds) = seeds {
        config.seeds = seeds;
    }
    if let Some(strategy) = strategy {
        config.strategy = strategy;
    }
    if config.seeds.is_empty() {
        return Err(input("no seeds to run"));
    }
    // the resolved config must point at the same file from any directory
    config.dataset = fs::canonicalize(&dataset_path).map_err(input)?.to_string_lossy().into_owned();
    resolve(&mut config, &dataset).map_err(input)?;

    let exec = Rayon::new(threads).map_err(runtime)?;
    let mut reports = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let report = run_campaign(&dataset, &config, seed, &exec).map_err(|e| runtime(format_args!("seed {seed}: {e}")))?;
        if !report.invariant_violations.is_empty() {
            return Err(runtime(format_args!(
                "seed {seed}: pool invariants violated after iterations {:?}",
                report.invariant_violations
            )));
        }
        reports.push(report);
    }
    write_run(out, &config, &reports).map_err(runtime)
}

fn seeds_in(dir: &Path) -> Result<Vec<u64>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| input(format_args!("cannot read run directory {}: {e}", dir.display())))?;
    let mut seeds = Vec::new();
    for entry in entries {
        let name = entry.map_err(runtime)?.file_name();
        let name = name.to_string_lossy();
        if let Some(seed) = name.strip_prefix("diagnostics_seed").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(seed) = seed.parse() {
                seeds.push(seed);
            }
        }
    }
    if seeds.is_empty() {
        return Err(input(format_args!("{} holds no run reports", dir.display())));
    }
    seeds.sort_unstable();
    Ok(seeds)
}

/// Per-seed, per-iteration analysis table as CSV.
pub fn analysis_csv(dir: &Path) -> Result<String, Failure> {
    let mut out = String::from(
        "seed,iteration,batch_entropy,cumulative_entropy,pseudo_count,drift_mean_mm,drift_median_mm,drift_max_mm,unlabeled_mkpe_mm\n",
    );
    let fmt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    for seed in seeds_in(dir)? {
        let diagnostics = parse_diagnostics(&read(&diagnostics_path(dir, seed)).map_err(input)?).map_err(input)?;
        let pseudo = parse_pseudo_lines(&read(&selections_path(dir, seed)).map_err(input)?).map_err(input)?;
        let mut drift: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for p in pseudo {
            drift.entry(p.iteration).or_default().push(p.drift_mm);
        }
        let mut cumulative: Vec<usize> = Vec::new();
        for d in diagnostics {
            cumulative.resize(d.cluster_counts.len().max(cumulative.len()), 0);
            for (c, n) in cumulative.iter_mut().zip(&d.cluster_counts) {
                *c += n;
            }
            let batch = cluster_entropy(&d.cluster_counts).ok();
            let total = cluster_entropy(&cumulative).ok();
            let mut errors = drift.remove(&d.iteration).unwrap_or_default();
            let s = summarize(&mut errors);
            let present = |v: f64| (s.count > 0).then_some(v);
            out.push_str(&format!(
                "{seed},{},{},{},{},{},{},{},{}\n",
                d.iteration,
                fmt(batch),
                fmt(total),
                s.count,
                fmt(present(s.mean)),
                fmt(present(s.median)),
                fmt(present(s.max)),
                fmt(d.unlabeled_mkpe_mm)
            ));
        }
    }
    Ok(out)
}

fn analyze(dir: &Path) -> Result<(), Failure> {
    let table = analysis_csv(dir)?;
    fs::write(dir.join("analysis.csv"), &table).map_err(runtime)?;
    print!("{table}");
    Ok(())
}

/// Cost of the config's schedule after each iteration, active learning
/// against annotating the same frames without retraining.
pub fn cost_table_csv(config: &CampaignConfig) -> String {
    let mut out = String::from("iteration,labeled_count,active_learning_hours,conventional_hours\n");
    for it in 0..=config.iterations {
        let labeled = config.init_labeled + it * config.batch_per_iter;
        let c = cost_report(it, labeled, &config.cost);
        out.push_str(&format!("{it},{labeled},{},{}\n", c.active_learning_hours, c.conventional_hours));
    }
    out
}

fn cost_table(config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let config = match config {
        Some(path) => load_config(path).map_err(input)?,
        None => CampaignConfig::default(),
    };
    let table = cost_table_csv(&config);
    match out {
        Some(path) => fs::write(path, table).map_err(runtime),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}
