//! Infill sampling criteria: given the DE offspring and a fitted surrogate,
//! choose the single point that receives the next true evaluation.
//!
//! Offspring-based criteria return the index of the chosen offspring; ties
//! always go to the lowest index.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::sampling::{local_search_de, population_box, EvaluatedSolution, Population};
use crate::surrogates::{GpModel, KnnModel};

/// Tunable constants of the criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfillParams {
    /// Exploration weight of the lower confidence bound.
    pub lcb_beta: f64,
    /// Number of quality levels used by the L1 criteria.
    pub levels: usize,
}

impl Default for InfillParams {
    fn default() -> Self {
        Self {
            lcb_beta: 2.0,
            levels: 4,
        }
    }
}

impl InfillParams {
    pub fn validate(&self) -> Result<()> {
        if self.lcb_beta.is_nan() || self.lcb_beta < 0.0 {
            return Err(Error::Config(format!("LCB beta must be >= 0, got {}", self.lcb_beta)));
        }
        if self.levels == 0 {
            return Err(Error::Config("level count must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a criterion may look at.
#[derive(Debug, Clone, Copy)]
pub struct InfillContext<'a> {
    pub offspring: &'a [Vec<f64>],
    pub population: &'a Population,
    pub archive: &'a [EvaluatedSolution],
    pub best_value: f64,
}

/// Index of the smallest score, first on ties. NaN never wins.
fn argmin_by(n: usize, score: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for i in 0..n {
        let s = score(i);
        if s < best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn argmax_by(n: usize, score: impl Fn(usize) -> f64) -> usize {
    argmin_by(n, |i| -score(i))
}

/// Lower confidence bound `mean - beta * std`.
pub fn lcb_select(gp: &GpModel, ctx: &InfillContext<'_>, beta: f64) -> usize {
    argmin_by(ctx.offspring.len(), |i| {
        let (mu, sd) = gp.predict(&ctx.offspring[i]);
        mu - beta * sd
    })
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement below `f_best` of a normal prediction.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    let gap = f_best - mu;
    if sigma < 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * standard_normal_cdf(z) + sigma * standard_normal_pdf(z)).max(0.0)
}

pub fn ei_select(gp: &GpModel, ctx: &InfillContext<'_>) -> usize {
    argmax_by(ctx.offspring.len(), |i| {
        let (mu, sd) = gp.predict(&ctx.offspring[i]);
        expected_improvement(mu, sd, ctx.best_value)
    })
}

/// Offspring with the best predicted value.
pub fn prescreen_select(predict: impl Fn(&[f64]) -> f64, ctx: &InfillContext<'_>) -> usize {
    argmin_by(ctx.offspring.len(), |i| predict(&ctx.offspring[i]))
}

/// Local search budget in surrogate evaluations for dimension `dim`.
pub fn local_search_budget(dim: usize) -> usize {
    100 * dim + 1000
}

/// Minimizes the surrogate over the bounding box of the population.
pub fn local_search_select<R: Rng + ?Sized>(
    predict: impl Fn(&[f64]) -> f64,
    population: &Population,
    de_pop_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (lb, ub) = population_box(population)?;
    let budget = local_search_budget(lb.len()).max(de_pop_size);
    local_search_de(predict, &lb, &ub, de_pop_size, budget, rng)
}

/// Offspring indices in the best predicted level that occurs among them.
pub fn best_level_candidates(knn: &KnnModel, offspring: &[Vec<f64>], levels: usize) -> Vec<usize> {
    let predicted: Vec<usize> = offspring.iter().map(|x| knn.predict_level(x, levels)).collect();
    let top = predicted.iter().copied().min().unwrap_or(0);
    (0..offspring.len()).filter(|&i| predicted[i] == top).collect()
}

/// Among the best-level offspring, the one with the lowest KNN prediction.
pub fn l1_exploit_select(knn: &KnnModel, ctx: &InfillContext<'_>, levels: usize) -> usize {
    let candidates = best_level_candidates(knn, ctx.offspring, levels);
    let k = argmin_by(candidates.len(), |c| knn.predict(&ctx.offspring[candidates[c]]));
    candidates[k]
}

/// Smallest Euclidean distance from `x` to any archived point.
pub fn distance_to_archive(x: &[f64], archive: &[EvaluatedSolution]) -> f64 {
    archive
        .iter()
        .map(|s| s.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Among the best-level offspring, the one farthest from the archive.
pub fn l1_explore_select(knn: &KnnModel, ctx: &InfillContext<'_>, levels: usize) -> usize {
    let candidates = best_level_candidates(knn, ctx.offspring, levels);
    let k = argmax_by(candidates.len(), |c| {
        distance_to_archive(&ctx.offspring[candidates[c]], ctx.archive)
    });
    candidates[k]
}
