//! Config-driven experiment protocol: train on the nominal environment,
//! evaluate across a perturbation sweep over multiple seeds, and emit
//! aggregate tables.
//!
//! Artifacts per run: `raw.csv` (one row per rollout), `cells.csv` (one row
//! per (sweep value, seed) with the safety flag), `summary.csv`, and
//! `manifest.json` (config hash, seed list, code version). All outputs are
//! deterministic byte-for-byte given the same config: training and every
//! evaluation cell use independent seeded RNG streams, and parallel cells
//! are collected in sorted order before writing.

use crate::cmdp::Policy;
use crate::envs::{make_sweep, rollout, EnvError, EnvSpec, SweepSpec};
use crate::learn::{train, LearnError, LearnerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid experiment config: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("result grids do not match; missing cells: {0:?}")]
    GridMismatch(Vec<String>),
    #[error("malformed results file: {0}")]
    Malformed(String),
    #[error("no reports to compare")]
    Empty,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Top-level experiment declaration, parsed from TOML. Unknown keys are
/// hard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run name used in summaries and comparisons.
    pub name: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Evaluation rollouts per (environment, seed) cell.
    pub rollouts: usize,
    /// Episodic budget for the safety flag (total cost per episode).
    pub eval_budget: f64,
    pub env: EnvSpec,
    pub sweep: SweepSpec,
    pub learner: LearnerConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Invalid("no seeds".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(ExperimentError::Invalid("seeds must be distinct".into()));
        }
        if self.rollouts == 0 {
            return Err(ExperimentError::Invalid("rollouts must be >= 1".into()));
        }
        if self.eval_budget.is_nan() || self.eval_budget < 0.0 {
            return Err(ExperimentError::Invalid("eval_budget negative".into()));
        }
        self.env.validate()?;
        self.learner.validate()?;
        Ok(())
    }

    /// Canonical serialized form used for the manifest hash.
    pub fn canonical_text(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// One evaluation rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub param: f64,
    pub seed: u64,
    pub rollout: usize,
    pub total_reward: f64,
    pub total_cost: f64,
}

/// Raw per-rollout results plus the episodic budget they were run under.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResults {
    pub budget: f64,
    pub rows: Vec<RawRow>,
}

/// Per-(sweep value, seed) aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStat {
    pub param: f64,
    pub seed: u64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    /// Mean total cost over the cell's rollouts within the episodic budget.
    pub safe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub name: String,
    pub cells: Vec<CellStat>,
    /// Percentage of (env, seed) cells whose mean cost is within budget.
    pub percent_safe: f64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    /// Mean over cells of (cell value / matched baseline cell mean); `None`
    /// without a baseline. Cells whose baseline mean is zero are skipped.
    pub normalized_reward: Option<f64>,
    pub normalized_cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub raw: RawResults,
    pub report: AggregateReport,
}

/// Trains one policy per seed on the nominal environment and evaluates every
/// (sweep point, seed) cell with the configured rollouts. Cells run in
/// parallel; results are ordered (sweep value, seed, rollout) regardless of
/// scheduling.
pub fn run(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<RunArtifacts, ExperimentError> {
    cfg.validate()?;
    let points = make_sweep(&cfg.env, &cfg.sweep)?;
    let nominal = cfg.env.with_parameter(&cfg.sweep.parameter, cfg.sweep.nominal)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0)) // 0 = rayon default
        .build()
        .map_err(|e| ExperimentError::Invalid(format!("thread pool: {e}")))?;

    let rows: Result<Vec<Vec<RawRow>>, ExperimentError> = pool.install(|| {
        // Train one policy per seed on the nominal environment.
        let policies: Result<Vec<Policy>, ExperimentError> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let mut learner = cfg.learner.clone();
                learner.seed = seed;
                let env = nominal.build();
                Ok(train(env.as_ref(), &learner)?.policy)
            })
            .collect();
        let policies = policies?;

        let cells: Vec<(usize, usize)> = (0..points.len())
            .flat_map(|p| (0..cfg.seeds.len()).map(move |s| (p, s)))
            .collect();
        cells
            .par_iter()
            .map(|&(point_idx, seed_idx)| {
                let point = &points[point_idx];
                let seed = cfg.seeds[seed_idx];
                let env = point.env.build();
                // Streams 0-2 belong to training; evaluation cells start at
                // 10 and are disjoint per sweep point.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(10 + point_idx as u64);
                (0..cfg.rollouts)
                    .map(|r| {
                        let t = rollout(
                            env.as_ref(),
                            &policies[seed_idx],
                            env.horizon(),
                            &mut rng,
                        )?;
                        Ok(RawRow {
                            param: point.value,
                            seed,
                            rollout: r,
                            total_reward: t.total_reward,
                            total_cost: t.total_cost,
                        })
                    })
                    .collect::<Result<Vec<RawRow>, ExperimentError>>()
            })
            .collect()
    });
    let raw = RawResults {
        budget: cfg.eval_budget,
        rows: rows?.into_iter().flatten().collect(),
    };
    let report = aggregate(&cfg.name, &raw, None)?;

    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| ExperimentError::Io {
        path: cfg.output_dir.clone(),
        message: e.to_string(),
    })?;
    write_artifact(&cfg.output_dir.join("raw.csv"), &raw_to_csv(&raw))?;
    write_artifact(&cfg.output_dir.join("cells.csv"), &cells_to_csv(&report.cells))?;
    write_artifact(&cfg.output_dir.join("summary.csv"), &summary_to_csv(std::slice::from_ref(&report)))?;
    write_artifact(&cfg.output_dir.join("manifest.json"), &manifest_json(cfg, &raw))?;

    Ok(RunArtifacts {
        dir: cfg.output_dir.clone(),
        raw,
        report,
    })
}

fn write_artifact(path: &Path, content: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, content).map_err(|e| ExperimentError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn manifest_json(cfg: &ExperimentConfig, raw: &RawResults) -> String {
    #[derive(Serialize)]
    struct Manifest<'a> {
        config_sha256: String,
        version: &'a str,
        seeds: &'a [u64],
        sweep_parameter: &'a str,
        rows: usize,
    }
    let digest = Sha256::digest(cfg.canonical_text().as_bytes());
    let manifest = Manifest {
        config_sha256: format!("{digest:x}"),
        version: env!("CARGO_PKG_VERSION"),
        seeds: &cfg.seeds,
        sweep_parameter: &cfg.sweep.parameter,
        rows: raw.rows.len(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

pub fn raw_to_csv(raw: &RawResults) -> String {
    let mut out = String::from("param,seed,rollout,total_reward,total_cost,budget\n");
    for r in &raw.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.param, r.seed, r.rollout, r.total_reward, r.total_cost, raw.budget
        )
        .unwrap();
    }
    out
}

pub fn parse_raw_csv(text: &str) -> Result<RawResults, ExperimentError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| ExperimentError::Malformed("empty file".into()))?;
    if header != "param,seed,rollout,total_reward,total_cost,budget" {
        return Err(ExperimentError::Malformed(format!("unexpected header '{header}'")));
    }
    let mut budget = None;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ExperimentError::Malformed(format!(
                "line {}: expected 6 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| ExperimentError::Malformed(format!("line {}: {e}", i + 2)))
        };
        let parse_u = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| ExperimentError::Malformed(format!("line {}: {e}", i + 2)))
        };
        rows.push(RawRow {
            param: parse_f(fields[0])?,
            seed: parse_u(fields[1])?,
            rollout: parse_u(fields[2])? as usize,
            total_reward: parse_f(fields[3])?,
            total_cost: parse_f(fields[4])?,
        });
        let b = parse_f(fields[5])?;
        if *budget.get_or_insert(b) != b {
            return Err(ExperimentError::Malformed(format!(
                "line {}: inconsistent budget",
                i + 2
            )));
        }
    }
    Ok(RawResults {
        budget: budget.ok_or_else(|| ExperimentError::Malformed("no data rows".into()))?,
        rows,
    })
}

pub fn cells_to_csv(cells: &[CellStat]) -> String {
    let mut out = String::from("param,seed,mean_reward,mean_cost,safe\n");
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.param,
            c.seed,
            c.mean_reward,
            c.mean_cost,
            u8::from(c.safe)
        )
        .unwrap();
    }
    out
}

pub fn summary_to_csv(reports: &[AggregateReport]) -> String {
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    let mut out =
        String::from("name,percent_safe,mean_reward,mean_cost,normalized_reward,normalized_cost\n");
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            r.percent_safe,
            r.mean_reward,
            r.mean_cost,
            fmt_opt(r.normalized_reward),
            fmt_opt(r.normalized_cost)
        )
        .unwrap();
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<AggregateReport>, ExperimentError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| ExperimentError::Malformed("empty file".into()))?;
    if header != "name,percent_safe,mean_reward,mean_cost,normalized_reward,normalized_cost" {
        return Err(ExperimentError::Malformed(format!("unexpected header '{header}'")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(ExperimentError::Malformed(format!(
                    "line {}: expected 6 fields",
                    i + 2
                )));
            }
            let parse_f = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| ExperimentError::Malformed(format!("line {}: {e}", i + 2)))
            };
            let parse_opt = |s: &str| -> Result<Option<f64>, ExperimentError> {
                if s == "-" {
                    Ok(None)
                } else {
                    parse_f(s).map(Some)
                }
            };
            Ok(AggregateReport {
                name: fields[0].to_string(),
                cells: Vec::new(),
                percent_safe: parse_f(fields[1])?,
                mean_reward: parse_f(fields[2])?,
                mean_cost: parse_f(fields[3])?,
                normalized_reward: parse_opt(fields[4])?,
                normalized_cost: parse_opt(fields[5])?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

fn cell_key(param: f64, seed: u64) -> (u64, u64) {
    (param.to_bits(), seed)
}

/// Groups raw rows into (param, seed) cells, ordered by (param, seed).
pub fn cells_from_raw(raw: &RawResults) -> Vec<CellStat> {
    let mut keys: Vec<(u64, u64)> = raw
        .rows
        .iter()
        .map(|r| cell_key(r.param, r.seed))
        .collect();
    keys.sort_by(|a, b| {
        f64::from_bits(a.0)
            .partial_cmp(&f64::from_bits(b.0))
            .unwrap()
            .then(a.1.cmp(&b.1))
    });
    keys.dedup();
    keys.into_iter()
        .map(|(bits, seed)| {
            let param = f64::from_bits(bits);
            let members: Vec<&RawRow> = raw
                .rows
                .iter()
                .filter(|r| cell_key(r.param, r.seed) == (bits, seed))
                .collect();
            let n = members.len() as f64;
            let mean_reward = members.iter().map(|r| r.total_reward).sum::<f64>() / n;
            let mean_cost = members.iter().map(|r| r.total_cost).sum::<f64>() / n;
            CellStat {
                param,
                seed,
                mean_reward,
                mean_cost,
                safe: mean_cost <= raw.budget,
            }
        })
        .collect()
}

/// Aggregates raw results into a report; with a baseline, adds normalized
/// columns over the matched (param, seed) grid.
pub fn aggregate(
    name: &str,
    raw: &RawResults,
    baseline: Option<&RawResults>,
) -> Result<AggregateReport, ExperimentError> {
    if raw.rows.is_empty() {
        return Err(ExperimentError::Malformed("no raw rows".into()));
    }
    let cells = cells_from_raw(raw);
    let n = cells.len() as f64;
    let percent_safe = 100.0 * cells.iter().filter(|c| c.safe).count() as f64 / n;
    let mean_reward = cells.iter().map(|c| c.mean_reward).sum::<f64>() / n;
    let mean_cost = cells.iter().map(|c| c.mean_cost).sum::<f64>() / n;

    let (normalized_reward, normalized_cost) = match baseline {
        None => (None, None),
        Some(base) => {
            let base_cells = cells_from_raw(base);
            let missing: Vec<String> = cells
                .iter()
                .map(|c| (c.param, c.seed))
                .filter(|&(p, s)| {
                    !base_cells
                        .iter()
                        .any(|b| cell_key(b.param, b.seed) == cell_key(p, s))
                })
                .chain(base_cells.iter().map(|b| (b.param, b.seed)).filter(|&(p, s)| {
                    !cells.iter().any(|c| cell_key(c.param, c.seed) == cell_key(p, s))
                }))
                .map(|(p, s)| format!("(param={p}, seed={s})"))
                .collect();
            if !missing.is_empty() {
                return Err(ExperimentError::GridMismatch(missing));
            }
            let ratio_mean = |f: fn(&CellStat) -> f64| {
                let ratios: Vec<f64> = cells
                    .iter()
                    .map(|c| {
                        let b = base_cells
                            .iter()
                            .find(|b| cell_key(b.param, b.seed) == cell_key(c.param, c.seed))
                            .unwrap();
                        (f(c), f(b))
                    })
                    .filter(|&(_, b)| b != 0.0)
                    .map(|(v, b)| v / b)
                    .collect();
                if ratios.is_empty() {
                    None
                } else {
                    Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
                }
            };
            (
                ratio_mean(|c| c.mean_reward),
                ratio_mean(|c| c.mean_cost),
            )
        }
    };

    Ok(AggregateReport {
        name: name.to_string(),
        cells,
        percent_safe,
        mean_reward,
        mean_cost,
        normalized_reward,
        normalized_cost,
    })
}

/// Side-by-side comparison: reports sorted by percent safe descending, ties
/// broken by normalized reward descending. Returns a CSV table.
pub fn compare(reports: &[AggregateReport]) -> Result<String, ExperimentError> {
    if reports.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let mut ordered: Vec<&AggregateReport> = reports.iter().collect();
    ordered.sort_by(|a, b| {
        b.percent_safe
            .partial_cmp(&a.percent_safe)
            .unwrap()
            .then_with(|| {
                let ra = a.normalized_reward.unwrap_or(f64::NEG_INFINITY);
                let rb = b.normalized_reward.unwrap_or(f64::NEG_INFINITY);
                rb.partial_cmp(&ra).unwrap()
            })
    });
    let owned: Vec<AggregateReport> = ordered.into_iter().cloned().collect();
    Ok(summary_to_csv(&owned))
}
