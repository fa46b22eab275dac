//! The main optimization loop and the strategies that drive it.
//!
//! A run evaluates a Latin hypercube of `N` points, then repeats until the
//! budget is spent: take the best `N` archived solutions as the population,
//! ask the controller for a set of actions, and execute them one at a time in
//! random order. Each execution costs one true evaluation, is graded, and
//! updates the action statistics. The set is abandoned as soon as an
//! execution strictly improves the archive best.
//!
//! The run generator is consumed in this order: initial sample; then per
//! decision, the controller; then per executed action, the pick from the
//! set, DE offspring (if the criterion needs them), surrogate fitting, and
//! the criterion itself.

mod archive;
mod config;
mod controllers;
mod trace;

pub use archive::Archive;
pub use config::{AlgorithmParams, BackendKind, ExpertMode, RunConfig, Strategy};
pub use controllers::{
    build_controller, AlterController, Controller, ExpertController, FixedController, QLearningController,
    RandomController, SeqController,
};
pub use trace::{RunTrace, TraceRow};

use crate::benchmarks::Problem;
use crate::error::{Error, Result};
use crate::experts::{
    Action, ActionTable, Budget, Criterion, DecisionContext, Grade, LabelSource, ScoringContext, SurrogateKind,
};
use crate::infill::{
    ei_select, l1_exploit_select, l1_explore_select, lcb_select, local_search_select, prescreen_select, InfillContext,
};
use crate::sampling::{de_offspring, latin_hypercube, EvaluatedSolution, Population};
use crate::surrogates::{fit_gp, fit_knn, fit_prs, fit_rbf, TrainingSet};
use crate::{rng_from_seed, RunRng};

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub archive: Archive,
    pub stats: ActionTable,
    pub decisions: usize,
    /// Decisions whose backend failed and fell back to a roulette draw.
    pub backend_failures: usize,
    /// Executed actions whose surrogate or criterion failed and which
    /// proposed the first DE offspring instead.
    pub action_fallbacks: usize,
}

impl RunOutcome {
    pub fn best(&self) -> &EvaluatedSolution {
        self.archive.best().expect("a finished run has evaluated solutions")
    }
}

/// Runs `config` on `problem` with the controller its strategy names.
pub fn run(problem: &Problem, config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut controller = build_controller(config)?;
    run_with(problem, config, controller.as_mut())
}

/// Runs `config` on `problem` with an explicit controller; the strategy
/// field of `config` is ignored.
pub fn run_with(problem: &Problem, config: &RunConfig, controller: &mut dyn Controller) -> Result<RunOutcome> {
    config.validate_core()?;
    let n = config.population_size;
    let mfes = config.max_evaluations;
    let mut rng = rng_from_seed(config.seed);

    let mut archive = Archive::new();
    let mut trace = RunTrace::default();
    for x in latin_hypercube(n, problem.lower(), problem.upper(), &mut rng) {
        let value = problem.evaluate(&x);
        archive.push(x, value);
        trace.rows.push(TraceRow {
            fe: archive.len(),
            best_so_far: archive.best_value(),
            iteration: 0,
            action: None,
            score: None,
            source: LabelSource::Init,
        });
    }

    let mut stats = ActionTable::new();
    let mut decisions = 0;
    let mut action_fallbacks = 0;
    while archive.len() < mfes {
        let population = Population::top_n(archive.solutions(), n);
        let budget = Budget {
            max_evaluations: mfes,
            used: archive.len(),
        };
        let ctx = DecisionContext {
            stats: &stats,
            budget,
            iteration: stats.executed() + 1,
        };
        let mut selection = controller.select(&ctx, &mut rng);
        decisions += 1;
        if selection.is_empty() {
            return Err(Error::Config("controller returned no actions".into()));
        }

        while let Some((action, source)) = selection.pop_random(&mut rng) {
            let (x, fell_back) = execute_action(action, &population, &archive, problem, config, &mut rng)?;
            action_fallbacks += usize::from(fell_back);
            let previous_best = archive.best_value();
            let value = problem.evaluate(&x);
            let candidate = archive.push(x, value).clone();
            let improved = value < previous_best;
            let iteration = stats.executed() + 1;
            let Grade { score, .. } = controller.grade(&ScoringContext {
                population: &population,
                candidate: &candidate,
                iteration,
            });
            stats.record(action, score);
            controller.observe(action, improved);
            trace.rows.push(TraceRow {
                fe: archive.len(),
                best_so_far: archive.best_value(),
                iteration,
                action: Some(action.id()),
                score: Some(score),
                source,
            });
            if improved || archive.len() >= mfes {
                break;
            }
        }
    }

    Ok(RunOutcome {
        trace,
        archive,
        stats,
        decisions,
        backend_failures: controller.backend_failures(),
        action_fallbacks,
    })
}

/// Produces the point that `action` proposes for true evaluation, and
/// whether the fallback (first DE offspring) had to be used.
pub fn execute_action(
    action: Action,
    population: &Population,
    archive: &Archive,
    problem: &Problem,
    config: &RunConfig,
    rng: &mut RunRng,
) -> Result<(Vec<f64>, bool)> {
    let params = &config.params;
    let lower = problem.lower();
    let upper = problem.upper();
    let mut offspring = None;
    let attempt = (|| -> Result<Vec<f64>> {
        let data = TrainingSet::from_solutions(population.members())?;
        if action.criterion() == Criterion::LocalSearch {
            let pop_size = params.local_search_pop.unwrap_or(config.population_size);
            return match action.model() {
                SurrogateKind::Rbf => {
                    let m = fit_rbf(&data)?;
                    local_search_select(|x| m.predict(x), population, pop_size, rng)
                }
                SurrogateKind::Prs => {
                    let m = fit_prs(&data, params.prs_degree)?;
                    local_search_select(|x| m.predict(x), population, pop_size, rng)
                }
                other => Err(Error::Config(format!("{other:?} has no local search action"))),
            };
        }

        let off = offspring.insert(de_offspring(population, &params.de, lower, upper, rng)?);
        let ctx = InfillContext {
            offspring: off,
            population,
            archive: archive.solutions(),
            best_value: archive.best_value(),
        };
        let pick = match (action.model(), action.criterion()) {
            (SurrogateKind::Gp, c) => {
                let gp = fit_gp(&data, &params.gp, rng)?;
                if c == Criterion::Lcb {
                    lcb_select(&gp, &ctx, params.infill.lcb_beta)
                } else {
                    ei_select(&gp, &ctx)
                }
            }
            (SurrogateKind::Rbf, _) => {
                let m = fit_rbf(&data)?;
                prescreen_select(|x| m.predict(x), &ctx)
            }
            (SurrogateKind::Prs, _) => {
                let m = fit_prs(&data, params.prs_degree)?;
                prescreen_select(|x| m.predict(x), &ctx)
            }
            (SurrogateKind::Knn, c) => {
                let m = fit_knn(&data, params.knn_k.min(data.len()))?;
                if c == Criterion::L1Exploit {
                    l1_exploit_select(&m, &ctx, params.infill.levels)
                } else {
                    l1_explore_select(&m, &ctx, params.infill.levels)
                }
            }
        };
        Ok(off[pick].clone())
    })();

    match attempt {
        Ok(x) => Ok((x, false)),
        Err(e) => {
            log::warn!(
                "action {} ({}) failed: {e}; using the first offspring",
                action,
                action.describe()
            );
            let off = match offspring {
                Some(off) => off,
                None => de_offspring(population, &params.de, lower, upper, rng)?,
            };
            Ok((off[0].clone(), true))
        }
    }
}
