//! Latin hypercube initialization, differential evolution offspring, bound
//! repair, and the DE sub-optimizer used by surrogate local search.
//!
//! Every function takes the run generator explicitly. Within
//! [`de_offspring`] each parent consumes the generator in a fixed order: the
//! two donor indices, then `j_rand`, then one uniform per coordinate, then one
//! uniform per coordinate that needs repair.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A decision vector together with its true objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Position in evaluation order, starting at 0.
    pub index: usize,
}

/// Members ordered best-first; ties keep the earlier-evaluated solution first.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<EvaluatedSolution>,
}

impl Population {
    pub fn from_members(mut members: Vec<EvaluatedSolution>) -> Self {
        members.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.index.cmp(&b.index)));
        Self { members }
    }

    /// Best `n` solutions of `solutions`.
    pub fn top_n(solutions: &[EvaluatedSolution], n: usize) -> Self {
        let mut pop = Self::from_members(solutions.to_vec());
        pop.members.truncate(n);
        pop
    }

    pub fn members(&self) -> &[EvaluatedSolution] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> Option<&EvaluatedSolution> {
        self.members.first()
    }

    pub fn dim(&self) -> usize {
        self.members.first().map_or(0, |m| m.x.len())
    }
}

/// DE control parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeConfig {
    pub scale_factor: f64,
    pub crossover_rate: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            scale_factor: 0.5,
            crossover_rate: 0.9,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor > 0.0 && self.scale_factor <= 1.0) {
            return Err(Error::Config(format!(
                "scale factor must lie in (0, 1], got {}",
                self.scale_factor
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config(format!(
                "crossover rate must lie in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        Ok(())
    }
}

/// Latin hypercube sample of `n` points in `[lower, upper]`.
///
/// Each dimension is cut into `n` equal strata and every stratum receives
/// exactly one point; strata are permuted independently per dimension.
/// Degenerate intervals (`lower == upper`) yield that value.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    assert_eq!(lower.len(), upper.len(), "bounds must have equal length");
    let d = lower.len();
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        // Fisher-Yates, drawn explicitly to keep the stream stable.
        for i in (1..n).rev() {
            let k = rng.random_range(0..=i);
            strata.swap(i, k);
        }
        let width = upper[j] - lower[j];
        for (point, stratum) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            let v = lower[j] + (*stratum as f64 + u) / n as f64 * width;
            point[j] = v.min(upper[j]);
        }
    }
    points
}

/// Bound repair: in-range values pass through, out-of-range values are
/// resampled uniformly in `[lower, upper)`.
pub fn repair<R: Rng + ?Sized>(value: f64, lower: f64, upper: f64, rng: &mut R) -> f64 {
    if (lower..=upper).contains(&value) {
        value
    } else {
        let u: f64 = rng.random();
        lower + u * (upper - lower)
    }
}

/// Mutant `base + F * (a - b)`.
pub fn mutant(base: &[f64], a: &[f64], b: &[f64], scale_factor: f64) -> Vec<f64> {
    base.iter()
        .zip(a.iter().zip(b))
        .map(|(x, (p, q))| x + scale_factor * (p - q))
        .collect()
}

/// Two distinct donor indices, both different from `target`.
fn donors<R: Rng + ?Sized>(n: usize, target: usize, rng: &mut R) -> (usize, usize) {
    debug_assert!(n >= 3);
    let r1 = loop {
        let r = rng.random_range(0..n);
        if r != target {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.random_range(0..n);
        if r != target && r != r1 {
            break r;
        }
    };
    (r1, r2)
}

/// Binomial crossover of `parent` and `mutant`; coordinate `j_rand` always
/// comes from the mutant.
fn crossover<R: Rng + ?Sized>(parent: &[f64], mutant: &[f64], crossover_rate: f64, rng: &mut R) -> Vec<f64> {
    let d = parent.len();
    let j_rand = rng.random_range(0..d);
    (0..d)
        .map(|j| {
            let r: f64 = rng.random();
            if r <= crossover_rate || j == j_rand {
                mutant[j]
            } else {
                parent[j]
            }
        })
        .collect()
}

/// One trial vector per member: best/1 mutation, binomial crossover, repair.
fn trial_vectors<R: Rng + ?Sized>(
    members: &[&[f64]],
    best: usize,
    config: &DeConfig,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = members.len();
    (0..n)
        .map(|i| {
            let (r1, r2) = donors(n, i, rng);
            let v = mutant(members[best], members[r1], members[r2], config.scale_factor);
            let mut trial = crossover(members[i], &v, config.crossover_rate, rng);
            for (j, value) in trial.iter_mut().enumerate() {
                *value = if lower[j] < upper[j] {
                    repair(*value, lower[j], upper[j], rng)
                } else {
                    lower[j]
                };
            }
            trial
        })
        .collect()
}

/// Offspring of `population`, one per member, all inside `[lower, upper]`.
pub fn de_offspring<R: Rng + ?Sized>(
    population: &Population,
    config: &DeConfig,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if population.len() < 3 {
        return Err(Error::PopulationTooSmall {
            needed: 3,
            got: population.len(),
        });
    }
    if population.dim() != lower.len() {
        return Err(Error::Dimension(format!(
            "population dimension {} vs bounds {}",
            population.dim(),
            lower.len()
        )));
    }
    let members: Vec<&[f64]> = population.members().iter().map(|m| m.x.as_slice()).collect();
    Ok(trial_vectors(&members, 0, config, lower, upper, rng))
}

/// Component-wise bounding box of a set of points.
pub fn bounding_box<P: AsRef<[f64]>>(points: &[P]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = points.first().ok_or(Error::EmptyPopulation)?.as_ref();
    let mut lo = first.to_vec();
    let mut hi = first.to_vec();
    for p in &points[1..] {
        for (j, v) in p.as_ref().iter().enumerate() {
            lo[j] = lo[j].min(*v);
            hi[j] = hi[j].max(*v);
        }
    }
    Ok((lo, hi))
}

/// Bounding box of the population's decision vectors.
pub fn population_box(population: &Population) -> Result<(Vec<f64>, Vec<f64>)> {
    let points: Vec<&[f64]> = population.members().iter().map(|m| m.x.as_slice()).collect();
    bounding_box(&points)
}

/// Minimizes `objective` over `[region_lb, region_ub]` with DE (best/1/bin,
/// F = 0.5, CR = 0.9, greedy one-to-one replacement).
///
/// The initial Latin hypercube population counts against `budget`; a final
/// partial generation is evaluated if the budget is not a multiple of
/// `pop_size`. Coordinates with `lb == ub` stay fixed at that value.
pub fn local_search_de<F, R>(
    objective: F,
    region_lb: &[f64],
    region_ub: &[f64],
    pop_size: usize,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if region_lb.len() != region_ub.len() || region_lb.is_empty() {
        return Err(Error::Dimension("local search region bounds differ in length".into()));
    }
    if region_lb
        .iter()
        .zip(region_ub)
        .any(|(l, u)| l.is_nan() || u.is_nan() || l > u)
    {
        return Err(Error::Config("local search region has lb > ub".into()));
    }
    if pop_size == 0 || budget < pop_size {
        return Err(Error::Config(format!(
            "local search budget {budget} must cover the population size {pop_size}"
        )));
    }

    let config = DeConfig::default();
    let mut xs = latin_hypercube(pop_size, region_lb, region_ub, rng);
    let mut fs: Vec<f64> = xs.iter().map(|x| sanitize(objective(x))).collect();
    let mut evals = pop_size;
    let mut best = argmin(&fs);

    while pop_size >= 3 && evals < budget {
        let members: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let trials = trial_vectors(&members, best, &config, region_lb, region_ub, rng);
        for (i, trial) in trials.into_iter().enumerate() {
            if evals >= budget {
                break;
            }
            let f = sanitize(objective(&trial));
            evals += 1;
            if f <= fs[i] {
                xs[i] = trial;
                fs[i] = f;
            }
        }
        best = argmin(&fs);
    }
    Ok(xs.swap_remove(best))
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Index of the smallest value; the first one on ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}
