//! Batches of independent runs and the tables derived from them.
//!
//! Output layout under the experiment directory:
//! - `traces/<problem>__<strategy>__seed<k>.csv`: per-run trace
//! - `runs.csv`: final error of every run
//! - `failures.csv`: runs that aborted, with the error message
//! - `summary.csv`: mean, std and median per cell; `best` marks the lowest
//!   mean of each problem
//! - `convergence/<problem>__<strategy>.csv`: mean best-so-far error per FE
//! - `ranks.csv`: mean rank of each strategy across problems
//! - `ranksum.csv`: rank-sum verdicts of each strategy against the first
//!
//! Everything except `failures.csv` is computed from the traces alone and
//! can be rebuilt with [`summarize_traces`].

mod checks;
mod stats;

pub use checks::{run_invariants, validate_experiment, Check};
pub use stats::{average_ranks, median, rank_sum_test, RankSumResult, ResultCell, Verdict};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{load_shifted_rotated, make_classical, Problem};
use crate::error::{Error, Result};
use crate::llm::ChatConfig;
use crate::orchestrator::{run, AlgorithmParams, RunConfig, RunTrace, Strategy};

/// A benchmark by classical name and dimension, or a shifted/rotated file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Overrides the default box, applied to every dimension.
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl ProblemSpec {
    pub fn classical(name: &str, dim: usize) -> Self {
        Self {
            name: Some(name.into()),
            dim: Some(dim),
            file: None,
            lower: None,
            upper: None,
        }
    }

    /// Builds the problem; relative files resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Problem> {
        let problem = match (&self.file, &self.name, self.dim) {
            (Some(file), _, _) => load_shifted_rotated(base.join(file))?,
            (None, Some(name), Some(dim)) => make_classical(name, dim)?,
            _ => {
                return Err(Error::Config(
                    "a problem needs either `file` or both `name` and `dim`".into(),
                ))
            }
        };
        match (self.lower, self.upper) {
            (None, None) => Ok(problem),
            (lo, hi) => {
                let d = problem.dim();
                let lower = vec![lo.unwrap_or(problem.lower()[0]); d];
                let upper = vec![hi.unwrap_or(problem.upper()[0]); d];
                problem.with_bounds(lower, upper)
            }
        }
    }
}

/// One experiment: every problem crossed with every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problems: Vec<ProblemSpec>,
    pub strategies: Vec<Strategy>,
    pub runs_per_cell: usize,
    pub max_evaluations: usize,
    pub population_size: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub params: AlgorithmParams,
    #[serde(default)]
    pub chat: ChatConfig,
    /// Record chat exchanges next to each trace.
    #[serde(default)]
    pub transcripts: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        if self.problems.is_empty() || self.strategies.is_empty() {
            return Err(Error::Config("need at least one problem and one strategy".into()));
        }
        for s in &self.strategies {
            self.run_config(*s, self.base_seed).validate()?;
        }
        Ok(())
    }

    pub fn run_config(&self, strategy: Strategy, seed: u64) -> RunConfig {
        RunConfig {
            population_size: self.population_size,
            max_evaluations: self.max_evaluations,
            seed,
            strategy,
            params: self.params.clone(),
            chat: self.chat.clone(),
            transcript: None,
        }
    }
}

/// One finished run, as needed for the tables.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub problem: String,
    pub strategy: String,
    pub seed: u64,
    /// Known optimum; errors are raw best values when absent.
    pub optimum: Option<f64>,
    pub trace: RunTrace,
}

impl RunRecord {
    pub fn error_curve(&self) -> Vec<f64> {
        let off = self.optimum.unwrap_or(0.0);
        self.trace.best_so_far().into_iter().map(|v| v - off).collect()
    }

    pub fn final_error(&self) -> f64 {
        self.error_curve().last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub problem: String,
    pub strategy: String,
    pub seed: u64,
    pub message: String,
}

/// Summary row of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub strategy: String,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    /// Lowest mean error among the strategies of this problem.
    pub best: bool,
    /// Some runs of the cell failed.
    pub incomplete: bool,
    /// Values are raw objective values because the optimum is unknown.
    pub raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumRow {
    pub problem: String,
    pub strategy: String,
    pub reference: String,
    pub statistic: f64,
    pub p_value: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRankRow {
    pub strategy: String,
    pub mean_rank: f64,
}

/// Derived tables of an experiment.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub cells: BTreeMap<(String, String), ResultCell>,
    /// Mean error per FE, per cell.
    pub convergence: BTreeMap<(String, String), Vec<f64>>,
    pub ranks: Vec<MeanRankRow>,
    pub ranksum: Vec<RankSumRow>,
    pub failures: Vec<RunFailure>,
}

impl Report {
    pub fn cell(&self, problem: &str, strategy: &str) -> Option<&ResultCell> {
        self.cells.get(&(problem.to_string(), strategy.to_string()))
    }
}

/// Tables from a set of run records. `problems` and `strategies` fix the
/// output order; `expected_runs` flags cells with missing runs.
pub fn summarize(records: &[RunRecord], problems: &[String], strategies: &[String], expected_runs: usize) -> Report {
    let mut report = Report::default();
    for problem in problems {
        let mut rows = Vec::new();
        for strategy in strategies {
            let mut cell_runs: Vec<&RunRecord> = records
                .iter()
                .filter(|r| &r.problem == problem && &r.strategy == strategy)
                .collect();
            cell_runs.sort_by_key(|r| r.seed);
            let errors: Vec<f64> = cell_runs.iter().map(|r| r.final_error()).collect();
            if errors.iter().any(|e| *e < -1e-9) {
                log::warn!("negative function error in {problem}/{strategy}; optimum value may be inexact");
            }
            let Some(cell) = ResultCell::from_values(errors) else {
                continue;
            };
            let curves: Vec<Vec<f64>> = cell_runs.iter().map(|r| r.error_curve()).collect();
            let len = curves.iter().map(Vec::len).min().unwrap_or(0);
            let mean_curve = (0..len)
                .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64)
                .collect();
            let key = (problem.clone(), strategy.clone());
            report.convergence.insert(key.clone(), mean_curve);
            rows.push(SummaryRow {
                problem: problem.clone(),
                strategy: strategy.clone(),
                runs: cell.values.len(),
                mean: cell.mean,
                std: cell.std,
                median: cell.median,
                best: false,
                incomplete: cell.values.len() < expected_runs,
                raw: cell_runs.iter().any(|r| r.optimum.is_none()),
            });
            report.cells.insert(key, cell);
        }
        if let Some(best) = rows.iter().map(|r| r.mean).min_by(f64::total_cmp) {
            for r in &mut rows {
                r.best = r.mean == best;
            }
        }
        report.summary.extend(rows);
    }

    let mut rank_sums = vec![0.0; strategies.len()];
    let mut rank_counts = vec![0usize; strategies.len()];
    for problem in problems {
        let present: Vec<(usize, f64)> = strategies
            .iter()
            .enumerate()
            .filter_map(|(i, s)| report.cell(problem, s).map(|c| (i, c.mean)))
            .collect();
        let ranks = average_ranks(&present.iter().map(|p| p.1).collect::<Vec<_>>());
        for ((i, _), r) in present.iter().zip(ranks) {
            rank_sums[*i] += r;
            rank_counts[*i] += 1;
        }
    }
    report.ranks = strategies
        .iter()
        .enumerate()
        .filter(|(i, _)| rank_counts[*i] > 0)
        .map(|(i, s)| MeanRankRow {
            strategy: s.clone(),
            mean_rank: rank_sums[i] / rank_counts[i] as f64,
        })
        .collect();

    if let Some(reference) = strategies.first() {
        let mut rows = Vec::new();
        for problem in problems {
            let Some(base) = report.cell(problem, reference) else {
                continue;
            };
            for strategy in &strategies[1..] {
                if let Some(other) = report.cell(problem, strategy) {
                    let r = rank_sum_test(&base.values, &other.values);
                    rows.push(RankSumRow {
                        problem: problem.clone(),
                        strategy: strategy.clone(),
                        reference: reference.clone(),
                        statistic: r.statistic,
                        p_value: r.p_value,
                        verdict: r.verdict.to_string(),
                    });
                }
            }
        }
        report.ranksum = rows;
    }
    report
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn trace_file_name(problem: &str, strategy: &str, seed: u64) -> String {
    format!("{}__{}__seed{seed}.csv", sanitize(problem), sanitize(strategy))
}

/// Options that do not belong in the experiment file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    /// Directory against which relative problem files are resolved.
    pub base_dir: Option<PathBuf>,
}

/// Runs every cell of `spec`, writes all artifacts, and returns the tables.
pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<Report> {
    spec.validate()?;
    let base = options.base_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let out = options.output_dir.clone().unwrap_or_else(|| spec.output_dir.clone());
    fs::create_dir_all(out.join("traces"))?;
    fs::create_dir_all(out.join("convergence"))?;
    if spec.transcripts {
        fs::create_dir_all(out.join("transcripts"))?;
    }

    let problems: Vec<Problem> = spec.problems.iter().map(|p| p.resolve(&base)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (pi, _) in problems.iter().enumerate() {
        for strategy in &spec.strategies {
            for k in 0..spec.runs_per_cell {
                jobs.push((pi, *strategy, spec.base_seed + k as u64));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<RunRecord, RunFailure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(pi, strategy, seed)| {
                let problem = &problems[pi];
                let mut config = spec.run_config(strategy, seed);
                let name = trace_file_name(problem.name(), &strategy.to_string(), seed);
                if spec.transcripts && strategy.needs_network() {
                    config.transcript = Some(out.join("transcripts").join(name.replace(".csv", ".jsonl")));
                }
                let fail = |message: String| RunFailure {
                    problem: problem.name().to_string(),
                    strategy: strategy.to_string(),
                    seed,
                    message,
                };
                let outcome = run(problem, &config).map_err(|e| fail(e.to_string()))?;
                outcome
                    .trace
                    .save(out.join("traces").join(&name))
                    .map_err(|e| fail(format!("writing trace: {e}")))?;
                log::info!(
                    "{} {} seed {}: best {:.6e}",
                    problem.name(),
                    strategy,
                    seed,
                    outcome.best().value
                );
                Ok(RunRecord {
                    problem: problem.name().to_string(),
                    strategy: strategy.to_string(),
                    seed,
                    optimum: problem.optimum_value(),
                    trace: outcome.trace,
                })
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => {
                log::warn!(
                    "run {} / {} / seed {} failed: {}",
                    f.problem,
                    f.strategy,
                    f.seed,
                    f.message
                );
                failures.push(f);
            }
        }
    }

    let problem_names: Vec<String> = problems.iter().map(|p| p.name().to_string()).collect();
    let strategy_names: Vec<String> = spec.strategies.iter().map(ToString::to_string).collect();
    let mut report = summarize(&records, &problem_names, &strategy_names, spec.runs_per_cell);
    report.failures = failures;
    write_report(&report, &records, &out)?;
    Ok(report)
}

#[derive(Serialize)]
struct RunRow<'a> {
    problem: &'a str,
    strategy: &'a str,
    seed: u64,
    final_best: f64,
    error: f64,
    raw: bool,
}

#[derive(Serialize)]
struct FailureRow<'a> {
    problem: &'a str,
    strategy: &'a str,
    seed: u64,
    message: &'a str,
}

/// Writes every table of `report` below `out`.
pub fn write_report(report: &Report, records: &[RunRecord], out: &Path) -> Result<()> {
    fs::create_dir_all(out.join("convergence"))?;
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.problem, &a.strategy, a.seed).cmp(&(&b.problem, &b.strategy, b.seed)));
    let mut w = csv::Writer::from_path(out.join("runs.csv"))?;
    for r in sorted {
        w.serialize(RunRow {
            problem: &r.problem,
            strategy: &r.strategy,
            seed: r.seed,
            final_best: r.trace.final_best().unwrap_or(f64::NAN),
            error: r.final_error(),
            raw: r.optimum.is_none(),
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("failures.csv"))?;
    w.write_record(["problem", "strategy", "seed", "message"])?;
    for f in &report.failures {
        w.serialize(FailureRow {
            problem: &f.problem,
            strategy: &f.strategy,
            seed: f.seed,
            message: &f.message,
        })?;
    }
    w.flush()?;

    write_rows(&out.join("summary.csv"), &report.summary)?;
    write_rows(&out.join("ranks.csv"), &report.ranks)?;
    write_rows(&out.join("ranksum.csv"), &report.ranksum)?;

    for ((problem, strategy), curve) in &report.convergence {
        let path = out
            .join("convergence")
            .join(format!("{}__{}.csv", sanitize(problem), sanitize(strategy)));
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fe", "mean_error"])?;
        for (i, v) in curve.iter().enumerate() {
            w.write_record([(i + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds the tables of a finished experiment from its trace files.
pub fn summarize_traces(spec: &ExperimentSpec, out: &Path, base: &Path) -> Result<Report> {
    let problems: Vec<Problem> = spec.problems.iter().map(|p| p.resolve(base)).collect::<Result<_>>()?;
    let mut records = Vec::new();
    for problem in &problems {
        for strategy in &spec.strategies {
            for k in 0..spec.runs_per_cell {
                let seed = spec.base_seed + k as u64;
                let path = out
                    .join("traces")
                    .join(trace_file_name(problem.name(), &strategy.to_string(), seed));
                if path.exists() {
                    records.push(RunRecord {
                        problem: problem.name().to_string(),
                        strategy: strategy.to_string(),
                        seed,
                        optimum: problem.optimum_value(),
                        trace: RunTrace::load(&path)?,
                    });
                }
            }
        }
    }
    let problem_names: Vec<String> = problems.iter().map(|p| p.name().to_string()).collect();
    let strategy_names: Vec<String> = spec.strategies.iter().map(ToString::to_string).collect();
    Ok(summarize(&records, &problem_names, &strategy_names, spec.runs_per_cell))
}
