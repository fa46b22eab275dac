use llm_saea::experts::*;
use llm_saea::llm::{mock_score, CalibratedMockDecision, MockDecision};
use llm_saea::rng_from_seed;
use llm_saea::sampling::{EvaluatedSolution, Population};
use proptest::prelude::*;

fn action(id: u8) -> Action {
    Action::from_id(id).unwrap()
}

#[test]
fn softmax_of_zero_and_ln3() {
    let p = softmax_probs(&[0.0, 3f64.ln()]);
    assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    let flat = softmax_probs(&[0.0; 8]);
    assert!(flat.iter().all(|v| (v - 0.125).abs() < 1e-15));
}

#[test]
fn softmax_is_shift_invariant_and_survives_large_scores() {
    let p = softmax_probs(&[1.0, 2.0, 3.0]);
    let q = softmax_probs(&[1001.0, 1002.0, 1003.0]);
    for (a, b) in p.iter().zip(&q) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn roulette_frequencies_follow_probabilities() {
    let scores = [0.0, 1.0, 2.5, 0.5, 3.0, 2.0, 0.0, 1.5];
    let probs = softmax_probs(&scores);
    let mut rng = rng_from_seed(77);
    let n = 100_000;
    let mut counts = [0usize; 8];
    for _ in 0..n {
        counts[roulette_wheel(&probs, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(&probs) {
        assert!((*c as f64 / n as f64 - p).abs() <= 0.01);
    }
}

#[test]
fn roulette_never_picks_zero_weight() {
    let mut rng = rng_from_seed(3);
    for _ in 0..10_000 {
        let i = roulette_wheel(&[0.0, 0.3, 0.0, 0.7, 0.0], &mut rng);
        assert!(i == 1 || i == 3);
    }
}

#[test]
fn mock_score_is_the_worse_share() {
    let members: Vec<EvaluatedSolution> = (0..10)
        .map(|i| EvaluatedSolution {
            x: vec![i as f64],
            value: i as f64,
            index: i,
        })
        .collect();
    let pop = Population::from_members(members);
    assert_eq!(mock_score(&pop, -1.0), 10.0);
    assert_eq!(mock_score(&pop, 100.0), 0.0);
    assert_eq!(mock_score(&pop, 4.5), 5.0);
    // Ties do not count as worse.
    assert_eq!(mock_score(&pop, 4.0), 5.0);
}

#[test]
fn mock_policy_is_epsilon_greedy() {
    let mut table = ActionTable::new();
    table.record(action(6), 9.0);
    table.record(action(2), 3.0);
    let mock = MockDecision { epsilon: 0.2 };
    let mut rng = rng_from_seed(12);
    let n = 20_000;
    let mut greedy = 0;
    for _ in 0..n {
        let v = mock.verdict(&table, &mut rng);
        let (a, label) = v.entries()[0];
        if label == Confidence::Certain {
            assert_eq!(a, action(6));
            greedy += 1;
        }
    }
    assert!((greedy as f64 / n as f64 - 0.8).abs() < 0.01);
}

#[test]
fn calibrated_labels_need_evidence() {
    let mock = CalibratedMockDecision { min_trials: 3 };
    let mut table = ActionTable::new();
    assert_eq!(mock.verdict(&table).labels(), vec![Confidence::Uncertain]);
    for _ in 0..3 {
        table.record(action(4), 8.0);
        table.record(action(1), 2.0);
    }
    assert_eq!(mock.label(&table, action(4)), Confidence::Certain);
    assert_eq!(mock.label(&table, action(1)), Confidence::Uncertain);
    let v = mock.verdict(&table);
    assert_eq!(v.actions(), vec![action(4), action(2)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bookkeeping_matches_score_lists(events in prop::collection::vec((0usize..8, 0u8..=10), 1..300)) {
        let mut table = ActionTable::new();
        let mut lists: Vec<Vec<f64>> = vec![Vec::new(); 8];
        for (a, s) in &events {
            table.record(Action::from_index(*a), *s as f64);
            lists[*a].push(*s as f64);
        }
        let t = table.executed();
        prop_assert_eq!(t, events.len() as u64);
        prop_assert_eq!(table.all().iter().map(|s| s.count).sum::<u64>(), t);
        for (s, list) in table.all().iter().zip(&lists) {
            prop_assert_eq!(s.count, list.len() as u64);
            prop_assert_eq!(s.frequency, s.count as f64 / t as f64);
            let mean = if list.is_empty() { 0.0 } else { list.iter().sum::<f64>() / list.len() as f64 };
            prop_assert!((s.score - mean).abs() <= 1e-12);
            prop_assert!((0.0..=10.0).contains(&s.score));
        }
    }

    #[test]
    fn softmax_is_a_distribution(scores in prop::collection::vec(-50.0f64..50.0, 1..9)) {
        let p = softmax_probs(&scores);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v > 0.0));
        // Order preserving.
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn selection_pop_drains_each_action_once(ids in prop::collection::vec(1u8..=8, 1..20), seed in 0u64..1000) {
        let mut sel = Selection::new();
        for id in &ids {
            sel.insert(action(*id), LabelSource::Certain);
        }
        let mut distinct: Vec<u8> = ids.clone();
        distinct.sort();
        distinct.dedup();
        prop_assert_eq!(sel.len(), distinct.len());
        let mut rng = rng_from_seed(seed);
        let mut seen = Vec::new();
        while let Some((a, _)) = sel.pop_random(&mut rng) {
            seen.push(a.id());
        }
        seen.sort();
        prop_assert_eq!(seen, distinct);
    }

    #[test]
    fn mock_scores_are_integers_on_the_scale(values in prop::collection::vec(-100.0f64..100.0, 1..40), v in -150.0f64..150.0) {
        let members = values.iter().enumerate().map(|(i, value)| EvaluatedSolution { x: vec![0.0], value: *value, index: i }).collect();
        let s = mock_score(&Population::from_members(members), v);
        prop_assert!((0.0..=10.0).contains(&s));
        prop_assert_eq!(s, s.round());
    }
}
