//! Deterministic stand-ins for the two experts, for offline and reproducible
//! runs. Their only randomness comes from the run generator.

use rand::Rng;

use crate::experts::{
    Action, ActionTable, BackendError, Confidence, DecisionBackend, DecisionContext, ExpertVerdict, ScoringBackend,
    ScoringContext, MAX_SCORE,
};
use crate::sampling::Population;
use crate::RunRng;

/// Percentile grade: `round(10 * share of members strictly worse than value)`.
pub fn mock_score(population: &Population, value: f64) -> f64 {
    if population.is_empty() {
        return 0.0;
    }
    let worse = population.members().iter().filter(|m| m.value > value).count();
    (MAX_SCORE * worse as f64 / population.len() as f64).round()
}

/// Action with the highest average score, lowest id on ties.
pub fn greedy_action(table: &ActionTable) -> Action {
    let mut best = Action::ALL[0];
    for a in Action::ALL {
        if table.get(a).score > table.get(best).score {
            best = a;
        }
    }
    best
}

/// Epsilon-greedy decision expert over the average scores.
///
/// With probability `1 - epsilon` it proposes the greedy action as certain,
/// otherwise a uniformly drawn action as uncertain. One uniform is drawn per
/// call, plus one action index when exploring.
#[derive(Debug, Clone)]
pub struct MockDecision {
    pub epsilon: f64,
}

impl Default for MockDecision {
    fn default() -> Self {
        Self { epsilon: 0.2 }
    }
}

impl MockDecision {
    pub fn verdict(&self, table: &ActionTable, rng: &mut RunRng) -> ExpertVerdict {
        let u: f64 = rng.random();
        if u < self.epsilon {
            let a = Action::from_index(rng.random_range(0..Action::COUNT));
            ExpertVerdict::single(a, Confidence::Uncertain)
        } else {
            ExpertVerdict::single(greedy_action(table), Confidence::Certain)
        }
    }
}

impl DecisionBackend for MockDecision {
    fn propose(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> Result<ExpertVerdict, BackendError> {
        Ok(self.verdict(ctx.stats, rng))
    }
}

/// Decision expert whose confidence labels track the evidence.
///
/// It proposes the greedy action and the least-tried action (lowest id on
/// ties). An action is labeled certain only when it has been tried at least
/// `min_trials` times and its average score is at least the median average
/// over all tried actions; anything else is uncertain. Consumes no
/// randomness.
#[derive(Debug, Clone)]
pub struct CalibratedMockDecision {
    pub min_trials: u64,
}

impl Default for CalibratedMockDecision {
    fn default() -> Self {
        Self { min_trials: 3 }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

impl CalibratedMockDecision {
    pub fn label(&self, table: &ActionTable, action: Action) -> Confidence {
        let tried: Vec<f64> = Action::ALL
            .iter()
            .map(|a| table.get(*a))
            .filter(|s| s.count > 0)
            .map(|s| s.score)
            .collect();
        let stats = table.get(action);
        match median(tried) {
            Some(m) if stats.count >= self.min_trials && stats.score >= m => Confidence::Certain,
            _ => Confidence::Uncertain,
        }
    }

    pub fn verdict(&self, table: &ActionTable) -> ExpertVerdict {
        let greedy = greedy_action(table);
        let mut least = Action::ALL[0];
        for a in Action::ALL {
            if table.get(a).count < table.get(least).count {
                least = a;
            }
        }
        let mut entries = vec![(greedy, self.label(table, greedy))];
        if least != greedy {
            entries.push((least, self.label(table, least)));
        }
        ExpertVerdict::new(entries).expect("at least one entry")
    }
}

impl DecisionBackend for CalibratedMockDecision {
    fn propose(&mut self, ctx: &DecisionContext<'_>, _rng: &mut RunRng) -> Result<ExpertVerdict, BackendError> {
        Ok(self.verdict(ctx.stats))
    }
}

/// Scoring expert that always answers with [`mock_score`].
#[derive(Debug, Clone, Default)]
pub struct MockScoring;

impl ScoringBackend for MockScoring {
    fn score(&mut self, ctx: &ScoringContext<'_>) -> Result<f64, BackendError> {
        Ok(mock_score(ctx.population, ctx.candidate.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::sampling::EvaluatedSolution;

    fn population(values: &[f64]) -> Population {
        Population::from_members(
            values
                .iter()
                .enumerate()
                .map(|(i, v)| EvaluatedSolution {
                    x: vec![i as f64],
                    value: *v,
                    index: i,
                })
                .collect(),
        )
    }

    #[test]
    fn percentile_extremes_and_rounding() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        let pop = population(&values);
        assert_eq!(mock_score(&pop, -1.0), 10.0);
        assert_eq!(mock_score(&pop, 1000.0), 0.0);
        // Strictly better than members 63..=99, i.e. 37 of them.
        assert_eq!(mock_score(&pop, 62.5), 4.0);
        // Ties are not counted as worse.
        assert_eq!(mock_score(&pop, 99.0), 0.0);
    }

    #[test]
    fn greedy_prefers_lowest_id_on_ties() {
        let mut table = ActionTable::new();
        assert_eq!(greedy_action(&table), Action::ALL[0]);
        table.record(Action::ALL[5], 4.0);
        table.record(Action::ALL[2], 4.0);
        assert_eq!(greedy_action(&table), Action::ALL[2]);
    }

    #[test]
    fn epsilon_extremes() {
        let mut table = ActionTable::new();
        table.record(Action::ALL[6], 9.0);
        let mut rng = rng_from_seed(0);
        let greedy = MockDecision { epsilon: 0.0 };
        for _ in 0..50 {
            let v = greedy.verdict(&table, &mut rng);
            assert_eq!(v.entries(), &[(Action::ALL[6], Confidence::Certain)]);
        }
        let explore = MockDecision { epsilon: 1.0 };
        for _ in 0..50 {
            assert_eq!(explore.verdict(&table, &mut rng).labels(), vec![Confidence::Uncertain]);
        }
    }

    #[test]
    fn calibrated_labels_follow_evidence() {
        let mock = CalibratedMockDecision::default();
        let mut table = ActionTable::new();
        let v = mock.verdict(&table);
        assert_eq!(v.entries(), &[(Action::ALL[0], Confidence::Uncertain)]);
        for _ in 0..3 {
            table.record(Action::ALL[1], 8.0);
            table.record(Action::ALL[0], 2.0);
        }
        let v = mock.verdict(&table);
        assert_eq!(
            v.entries(),
            &[
                (Action::ALL[1], Confidence::Certain),
                (Action::ALL[2], Confidence::Uncertain)
            ]
        );
        assert_eq!(mock.label(&table, Action::ALL[0]), Confidence::Uncertain);
    }
}
