//! Experiment CLI.
//!
//! `ramu run <config>` trains per seed on the nominal environment and
//! evaluates across the configured perturbation sweep; `ramu aggregate`
//! recomputes summaries from raw CSVs (optionally normalized against a
//! baseline run); `ramu compare` renders a side-by-side table from summary
//! CSVs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 unparseable config or
//! malformed inputs, 3 unwritable output.

use clap::{Parser, Subcommand};
use ramu_core::experiment::{
    aggregate, compare, parse_raw_csv, parse_summary_csv, run, summary_to_csv, ExperimentConfig,
    ExperimentError,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ramu", about = "Risk-averse model uncertainty experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full protocol from a TOML config: train on the nominal
    /// environment per seed, evaluate across the sweep, write artifacts.
    Run {
        config: PathBuf,
        /// Replace the config's seed list (comma-separated).
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Replace the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel worker count (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate a raw results CSV into a summary, optionally normalized
    /// against a matched baseline raw CSV.
    Aggregate {
        raw: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Run name for the summary row.
        #[arg(long, default_value = "run")]
        name: String,
    },
    /// Render a side-by-side comparison table from summary CSVs, sorted by
    /// percent safe.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Parse(_) | ExperimentError::Invalid(_) | ExperimentError::Malformed(_) => 2,
        ExperimentError::Io { .. } => 3,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run {
            config,
            seed_override,
            out,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seeds) = seed_override {
                cfg.seeds = seeds;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let artifacts = run(&cfg, jobs)?;
            println!("wrote {}", artifacts.dir.display());
            print!("{}", summary_to_csv(&[artifacts.report]));
            Ok(())
        }
        Command::Aggregate {
            raw,
            baseline,
            name,
        } => {
            let raw_results = parse_raw_csv(&read(&raw)?)?;
            let baseline_results = baseline
                .as_deref()
                .map(|p| parse_raw_csv(&read(p)?))
                .transpose()?;
            let report = aggregate(&name, &raw_results, baseline_results.as_ref())?;
            print!("{}", summary_to_csv(&[report]));
            Ok(())
        }
        Command::Compare { summaries } => {
            let mut reports = Vec::new();
            for path in &summaries {
                reports.extend(parse_summary_csv(&read(path)?)?);
            }
            print!("{}", compare(&reports)?);
            Ok(())
        }
    }
}

fn read(path: &std::path::Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
