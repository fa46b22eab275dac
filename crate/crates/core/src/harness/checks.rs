use std::path::Path;

use crate::benchmarks::Problem;
use crate::error::Result;
use crate::experts::Action;
use crate::orchestrator::{run, RunConfig, RunOutcome};

use super::ExperimentSpec;

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Invariants every finished run must satisfy.
pub fn run_invariants(problem: &Problem, config: &RunConfig, outcome: &RunOutcome) -> Vec<Check> {
    let mut checks = Vec::new();
    let mfes = config.max_evaluations;
    let archive = outcome.archive.solutions();

    checks.push(Check::new(
        "budget",
        archive.len() == mfes && outcome.trace.rows.len() == mfes,
        format!(
            "{} evaluations, {} trace rows, budget {mfes}",
            archive.len(),
            outcome.trace.rows.len()
        ),
    ));

    let curve = outcome.trace.best_so_far();
    checks.push(Check::new(
        "monotone best-so-far",
        curve.windows(2).all(|w| w[1] <= w[0]),
        "",
    ));

    let outside = archive.iter().filter(|s| !problem.contains(&s.x)).count();
    checks.push(Check::new(
        "in bounds",
        outside == 0,
        format!("{outside} points outside the box"),
    ));

    let min = archive.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "best is archive minimum",
        outcome.archive.best_value() == min && curve.last() == Some(&min),
        format!("best {:e}, minimum {min:e}", outcome.archive.best_value()),
    ));

    let stats = &outcome.stats;
    let t = stats.executed();
    let total: u64 = stats.all().iter().map(|s| s.count).sum();
    checks.push(Check::new("counts sum to t", total == t, format!("sum {total}, t {t}")));

    let freq_ok = t == 0 || stats.all().iter().all(|s| s.frequency == s.count as f64 / t as f64);
    checks.push(Check::new("V = T / t", freq_ok, ""));

    let scored = outcome.trace.scored_actions();
    let mut worst = 0.0_f64;
    for a in Action::ALL {
        let scores: Vec<f64> = scored.iter().filter(|(id, _)| *id == a.id()).map(|(_, s)| *s).collect();
        let mean = if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        };
        worst = worst.max((stats.get(a).score - mean).abs());
        if scores.len() as u64 != stats.get(a).count {
            worst = f64::INFINITY;
        }
    }
    checks.push(Check::new(
        "S = mean of scores",
        worst <= 1e-12,
        format!("largest deviation {worst:e}"),
    ));
    checks
}

/// Validates an experiment file and smoke-tests every offline strategy on
/// its first problem with a small budget (`n` initial points, `extra`
/// iterations). Network strategies are only checked for configuration.
pub fn validate_experiment(spec: &ExperimentSpec, base: &Path, n: usize, extra: usize) -> Result<Vec<Check>> {
    spec.validate()?;
    let mut checks = Vec::new();
    let mut problems = Vec::new();
    for p in &spec.problems {
        let problem = p.resolve(base)?;
        let center: Vec<f64> = problem
            .lower()
            .iter()
            .zip(problem.upper())
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        let v = problem.evaluate(&center);
        checks.push(Check::new(
            format!("{}: finite at box center", problem.name()),
            v.is_finite(),
            format!("f = {v:e}"),
        ));
        problems.push(problem);
    }
    let Some(problem) = problems.first() else {
        return Ok(checks);
    };
    for strategy in &spec.strategies {
        if strategy.needs_network() {
            continue;
        }
        let mut config = spec.run_config(*strategy, spec.base_seed);
        config.population_size = n;
        config.max_evaluations = n + extra;
        match run(problem, &config) {
            Ok(outcome) => {
                for c in run_invariants(problem, &config, &outcome) {
                    checks.push(Check::new(format!("{strategy}: {}", c.name), c.passed, c.detail));
                }
            }
            Err(e) => checks.push(Check::new(format!("{strategy}: smoke run"), false, e.to_string())),
        }
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::make_classical;
    use crate::orchestrator::Strategy;

    #[test]
    fn mock_run_satisfies_invariants() {
        let p = make_classical("griewank", 3).unwrap();
        let config = RunConfig::new(8, 30, 4, Strategy::MOCK);
        let out = run(&p, &config).unwrap();
        for c in run_invariants(&p, &config, &out) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn tampered_stats_are_caught() {
        let p = make_classical("ellipsoid", 2).unwrap();
        let config = RunConfig::new(6, 12, 1, Strategy::Seq);
        let mut out = run(&p, &config).unwrap();
        out.trace.rows.pop();
        let failed: Vec<String> = run_invariants(&p, &config, &out)
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        assert!(failed.contains(&"budget".to_string()));
        assert!(failed.contains(&"S = mean of scores".to_string()));
    }
}
