use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use plotters::prelude::*;

use llm_saea::benchmarks::{load_shifted_rotated, make_classical, Problem};
use llm_saea::experts::Action;
use llm_saea::harness::{run_experiment, validate_experiment, ExperimentSpec, RunOptions};
use llm_saea::orchestrator::{run, AlgorithmParams, BackendKind, RunConfig, Strategy};

#[derive(Parser)]
#[command(
    name = "llm-saea",
    version,
    about = "Expert-driven surrogate-assisted evolutionary optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Llm,
    Mock,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write its trace.
    Run {
        /// Classical benchmark name (ellipsoid, rosenbrock, ackley, griewank, rastrigin).
        #[arg(long, conflicts_with = "problem_file")]
        problem: Option<String>,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        /// Shifted/rotated problem description (TOML).
        #[arg(long)]
        problem_file: Option<PathBuf>,
        #[arg(long, default_value = "mock")]
        strategy: String,
        /// Replaces the backend of an expert strategy.
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short = 'n', default_value_t = 100)]
        population: usize,
        #[arg(long, default_value_t = 1000)]
        evaluations: usize,
        /// TOML file with algorithm parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// JSON-lines log of every chat exchange.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Trace CSV destination.
        #[arg(long, short = 'o', default_value = "trace.csv")]
        output: PathBuf,
    },
    /// Run an experiment file: every problem against every strategy.
    Bench {
        spec: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Replaces the backend of every expert strategy.
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        #[arg(long)]
        transcripts: bool,
    },
    /// Draw the convergence curves of an experiment directory as SVG.
    Plot {
        dir: PathBuf,
        /// Destination directory; defaults to `<dir>/plots`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check an experiment file and smoke-test its offline strategies.
    Validate {
        spec: PathBuf,
        #[arg(long, default_value_t = 10)]
        population: usize,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
    },
}

fn with_backend(strategy: Strategy, backend: Option<Backend>) -> Strategy {
    match (strategy, backend) {
        (Strategy::Expert { mode, .. }, Some(b)) => Strategy::Expert {
            backend: match b {
                Backend::Llm => BackendKind::Llm,
                Backend::Mock => BackendKind::Mock,
            },
            mode,
        },
        _ => strategy,
    }
}

fn spec_dir(path: &Path) -> PathBuf {
    path.parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            problem,
            dim,
            problem_file,
            strategy,
            backend,
            seed,
            population,
            evaluations,
            params,
            transcript,
            output,
        } => {
            let problem: Problem = match (problem, problem_file) {
                (_, Some(file)) => load_shifted_rotated(&file)?,
                (Some(name), None) => make_classical(&name, dim)?,
                (None, None) => bail!("give --problem or --problem-file"),
            };
            let strategy = with_backend(strategy.parse()?, backend);
            let mut config = RunConfig::new(population, evaluations, seed, strategy);
            if let Some(path) = params {
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                config.params =
                    toml::from_str::<AlgorithmParams>(&text).with_context(|| format!("parsing {}", path.display()))?;
            }
            config.transcript = transcript;
            let outcome = run(&problem, &config)?;
            outcome.trace.save(&output)?;

            let best = outcome.best();
            println!("problem     {} ({}-D)", problem.name(), problem.dim());
            println!("strategy    {strategy}");
            println!("best        {:.6e}", best.value);
            if let Some(opt) = problem.optimum_value() {
                println!("error       {:.6e}", best.value - opt);
            }
            println!("decisions   {}", outcome.decisions);
            println!(
                "fallbacks   {} backend, {} action",
                outcome.backend_failures, outcome.action_fallbacks
            );
            for a in Action::ALL {
                let s = outcome.stats.get(a);
                println!("  {a} {:<22} T={:<4} S={:.3}", a.describe(), s.count, s.score);
            }
            println!("trace       {}", output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            spec: path,
            workers,
            output_dir,
            backend,
            transcripts,
        } => {
            let mut spec = ExperimentSpec::load(&path)?;
            for s in &mut spec.strategies {
                *s = with_backend(*s, backend);
            }
            spec.transcripts |= transcripts;
            let options = RunOptions {
                workers,
                output_dir,
                base_dir: Some(spec_dir(&path)),
            };
            let report = run_experiment(&spec, &options)?;
            println!(
                "{:<22} {:<24} {:>5} {:>12} {:>12} {:>12}",
                "problem", "strategy", "runs", "mean", "std", "median"
            );
            for row in &report.summary {
                println!(
                    "{:<22} {:<24} {:>5} {:>12.4e} {:>12.4e} {:>12.4e}{}",
                    row.problem,
                    row.strategy,
                    row.runs,
                    row.mean,
                    row.std,
                    row.median,
                    if row.best { " *" } else { "" }
                );
            }
            println!();
            for r in &report.ranks {
                println!("mean rank {:<24} {:.2}", r.strategy, r.mean_rank);
            }
            if !report.failures.is_empty() {
                eprintln!("{} runs failed; see failures.csv", report.failures.len());
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { dir, output } => {
            let out = output.unwrap_or_else(|| dir.join("plots"));
            let written = plot_convergence(&dir.join("convergence"), &out)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            spec: path,
            population,
            iterations,
        } => {
            let spec = ExperimentSpec::load(&path)?;
            let checks = validate_experiment(&spec, &spec_dir(&path), population, iterations)?;
            let mut failed = 0;
            for c in &checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                if c.detail.is_empty() {
                    println!("{mark} {}", c.name);
                } else {
                    println!("{mark} {} ({})", c.name, c.detail);
                }
                failed += usize::from(!c.passed);
            }
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

type Curve = (String, Vec<f64>);

/// Reads `convergence/<problem>__<strategy>.csv` files grouped by problem.
fn read_curves(dir: &Path) -> Result<Vec<(String, Vec<Curve>)>> {
    let mut groups: Vec<(String, Vec<Curve>)> = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let Some((problem, strategy)) = stem.split_once("__") else {
            continue;
        };
        let mut reader = csv::Reader::from_path(&path)?;
        let mut values = Vec::new();
        for row in reader.records() {
            let row = row?;
            values.push(row.get(1).unwrap_or("nan").parse::<f64>()?);
        }
        match groups.iter_mut().find(|(p, _)| p == problem) {
            Some((_, curves)) => curves.push((strategy.to_string(), values)),
            None => groups.push((problem.to_string(), vec![(strategy.to_string(), values)])),
        }
    }
    Ok(groups)
}

fn plot_convergence(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let groups = read_curves(dir)?;
    if groups.is_empty() {
        bail!("no convergence curves in {}", dir.display());
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (problem, curves) in groups {
        let path = out.join(format!("{problem}.svg"));
        let positive = curves
            .iter()
            .flat_map(|(_, c)| c)
            .copied()
            .filter(|v| *v > 0.0 && v.is_finite());
        let (lo, hi) = positive.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if lo.is_finite() {
            (lo * 0.5, hi * 2.0)
        } else {
            (1e-12, 1.0)
        };
        let floor = lo;
        let fes = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(1);

        {
            let root = SVGBackend::new(&path, (800, 560)).into_drawing_area();
            root.fill(&WHITE)?;
            let mut chart = ChartBuilder::on(&root)
                .caption(&problem, ("sans-serif", 24))
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(70)
                .build_cartesian_2d(1..fes, (lo..hi).log_scale())?;
            chart
                .configure_mesh()
                .x_desc("function evaluations")
                .y_desc("mean error")
                .y_label_formatter(&|v| format!("{v:.0e}"))
                .draw()?;
            for (i, (strategy, curve)) in curves.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                chart
                    .draw_series(LineSeries::new(
                        curve.iter().enumerate().map(|(k, v)| (k + 1, v.max(floor))),
                        color.stroke_width(2),
                    ))?
                    .label(strategy.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()?;
            root.present()?;
        }
        written.push(path);
    }
    Ok(written)
}
