//! Action selection policies: the expert pair and the ablation baselines.

use rand::Rng;

use super::config::{AlgorithmParams, BackendKind, ExpertMode, RunConfig, Strategy};
use crate::error::Result;
use crate::experts::{
    decide, grade, Action, DecisionBackend, DecisionContext, Grade, GradeSource, LabelSource, ScoringBackend,
    ScoringContext, Selection, SelectionMode,
};
use crate::llm::mock::{mock_score, CalibratedMockDecision, MockDecision, MockScoring};
use crate::llm::{HttpTransport, LlmDecisionExpert, LlmScoringExpert, Transcript};
use crate::RunRng;

/// Chooses the actions of each iteration and grades their outcomes.
pub trait Controller: Send {
    fn select(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> Selection;

    /// Grade of an executed action. Baselines use the percentile rule so
    /// that the statistics are maintained identically for every strategy.
    fn grade(&mut self, ctx: &ScoringContext<'_>) -> Grade {
        Grade {
            score: mock_score(ctx.population, ctx.candidate.value),
            source: GradeSource::Expert,
        }
    }

    /// Called after every executed action; `improved` means the archive best
    /// strictly decreased.
    fn observe(&mut self, _action: Action, _improved: bool) {}

    /// Number of decision requests that fell back because the backend failed.
    fn backend_failures(&self) -> usize {
        0
    }
}

/// Decision expert plus scoring expert.
pub struct ExpertController {
    decision: Box<dyn DecisionBackend>,
    scoring: Box<dyn ScoringBackend>,
    mode: SelectionMode,
    failures: usize,
}

impl ExpertController {
    pub fn new(decision: Box<dyn DecisionBackend>, scoring: Box<dyn ScoringBackend>, mode: SelectionMode) -> Self {
        Self {
            decision,
            scoring,
            mode,
            failures: 0,
        }
    }
}

impl Controller for ExpertController {
    fn select(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> Selection {
        let d = decide(ctx, self.decision.as_mut(), self.mode, rng);
        if d.error.is_some() {
            self.failures += 1;
        }
        d.selection
    }

    fn grade(&mut self, ctx: &ScoringContext<'_>) -> Grade {
        grade(ctx, self.scoring.as_mut())
    }

    fn backend_failures(&self) -> usize {
        self.failures
    }
}

/// Always the same action.
pub struct FixedController(pub Action);

impl Controller for FixedController {
    fn select(&mut self, _: &DecisionContext<'_>, _: &mut RunRng) -> Selection {
        Selection::single(self.0, LabelSource::Strategy)
    }
}

/// Actions 1 to 8 in turn, one per decision.
#[derive(Default)]
pub struct SeqController {
    decisions: usize,
}

impl Controller for SeqController {
    fn select(&mut self, _: &DecisionContext<'_>, _: &mut RunRng) -> Selection {
        let a = Action::from_index(self.decisions % Action::COUNT);
        self.decisions += 1;
        Selection::single(a, LabelSource::Strategy)
    }
}

/// One uniform draw per decision.
pub struct RandomController;

impl Controller for RandomController {
    fn select(&mut self, _: &DecisionContext<'_>, rng: &mut RunRng) -> Selection {
        let a = Action::from_index(rng.random_range(0..Action::COUNT));
        Selection::single(a, LabelSource::Strategy)
    }
}

/// Repeats an improving action; otherwise switches to one of the others.
#[derive(Default)]
pub struct AlterController {
    last: Option<(Action, bool)>,
}

impl Controller for AlterController {
    fn select(&mut self, _: &DecisionContext<'_>, rng: &mut RunRng) -> Selection {
        let a = match self.last {
            Some((a, true)) => a,
            Some((a, false)) => {
                let k = rng.random_range(0..Action::COUNT - 1);
                Action::from_index(if k >= a.index() { k + 1 } else { k })
            }
            None => Action::from_index(rng.random_range(0..Action::COUNT)),
        };
        Selection::single(a, LabelSource::Strategy)
    }

    fn observe(&mut self, action: Action, improved: bool) {
        self.last = Some((action, improved));
    }
}

/// Stateless Q-learning with epsilon-greedy selection and 0/1 reward.
pub struct QLearningController {
    q: [f64; 8],
    epsilon: f64,
    alpha: f64,
}

impl QLearningController {
    pub fn new(epsilon: f64, alpha: f64) -> Self {
        Self {
            q: [0.0; 8],
            epsilon,
            alpha,
        }
    }

    pub fn q_values(&self) -> &[f64; 8] {
        &self.q
    }

    fn greedy(&self) -> Action {
        let mut best = 0;
        for i in 1..Action::COUNT {
            if self.q[i] > self.q[best] {
                best = i;
            }
        }
        Action::from_index(best)
    }
}

impl Controller for QLearningController {
    fn select(&mut self, _: &DecisionContext<'_>, rng: &mut RunRng) -> Selection {
        let u: f64 = rng.random();
        let a = if u < self.epsilon {
            Action::from_index(rng.random_range(0..Action::COUNT))
        } else {
            self.greedy()
        };
        Selection::single(a, LabelSource::Strategy)
    }

    fn observe(&mut self, action: Action, improved: bool) {
        let r = if improved { 1.0 } else { 0.0 };
        let q = &mut self.q[action.index()];
        *q += self.alpha * (r - *q);
    }
}

fn mock_decision(backend: BackendKind, params: &AlgorithmParams) -> Box<dyn DecisionBackend> {
    match backend {
        BackendKind::Calibrated => Box::new(CalibratedMockDecision {
            min_trials: params.calibrated_min_trials,
        }),
        _ => Box::new(MockDecision {
            epsilon: params.mock_epsilon,
        }),
    }
}

/// Builds the controller named by `config.strategy`.
pub fn build_controller(config: &RunConfig) -> Result<Box<dyn Controller>> {
    let params = &config.params;
    Ok(match config.strategy {
        Strategy::Fixed(a) => Box::new(FixedController(a)),
        Strategy::Seq => Box::<SeqController>::default(),
        Strategy::Random => Box::new(RandomController),
        Strategy::Alter => Box::<AlterController>::default(),
        Strategy::QLearning => Box::new(QLearningController::new(params.q_epsilon, params.q_alpha)),
        Strategy::Expert { backend, mode } => {
            let (decision, scoring): (Box<dyn DecisionBackend>, Box<dyn ScoringBackend>) =
                if backend == BackendKind::Llm {
                    let transcript = config.transcript.as_ref().map(Transcript::create).transpose()?;
                    let mut d = LlmDecisionExpert::new(
                        Box::new(HttpTransport::new(config.chat.clone())?),
                        mode != ExpertMode::NoSrc,
                    );
                    let mut s = LlmScoringExpert::new(Box::new(HttpTransport::new(config.chat.clone())?));
                    if let Some(t) = transcript {
                        d = d.with_transcript(t.clone());
                        s = s.with_transcript(t);
                    }
                    let s: Box<dyn ScoringBackend> = if mode == ExpertMode::SingleExpert {
                        Box::new(MockScoring)
                    } else {
                        Box::new(s)
                    };
                    (Box::new(d), s)
                } else {
                    (mock_decision(backend, params), Box::new(MockScoring))
                };
            Box::new(ExpertController::new(decision, scoring, mode.selection_mode()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{ActionTable, Budget};
    use crate::rng_from_seed;

    fn ctx(table: &ActionTable) -> DecisionContext<'_> {
        DecisionContext {
            stats: table,
            budget: Budget {
                max_evaluations: 100,
                used: 10,
            },
            iteration: 1,
        }
    }

    fn only(s: Selection) -> Action {
        assert_eq!(s.len(), 1);
        s.actions()[0]
    }

    #[test]
    fn seq_cycles() {
        let table = ActionTable::new();
        let mut rng = rng_from_seed(0);
        let mut c = SeqController::default();
        let ids: Vec<u8> = (0..9).map(|_| only(c.select(&ctx(&table), &mut rng)).id()).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5, 6, 7, 8, 1]);
    }

    #[test]
    fn alter_repeats_after_improvement_and_switches_otherwise() {
        let table = ActionTable::new();
        let mut rng = rng_from_seed(0);
        let mut c = AlterController::default();
        let a3 = Action::from_id(3).unwrap();
        c.observe(a3, true);
        assert_eq!(only(c.select(&ctx(&table), &mut rng)), a3);
        c.observe(a3, false);
        for _ in 0..200 {
            assert_ne!(only(c.select(&ctx(&table), &mut rng)), a3);
        }
    }

    #[test]
    fn qlearning_without_rewards_stays_at_zero() {
        let table = ActionTable::new();
        let mut rng = rng_from_seed(4);
        let mut c = QLearningController::new(0.1, 0.1);
        let mut greedy = 0;
        for _ in 0..1000 {
            let a = only(c.select(&ctx(&table), &mut rng));
            if a.id() == 1 {
                greedy += 1;
            }
            c.observe(a, false);
        }
        assert_eq!(c.q_values(), &[0.0; 8]);
        // 0.9 greedy plus 0.1 / 8 exploratory.
        assert!((880..=945).contains(&greedy), "{greedy}");
    }

    #[test]
    fn qlearning_update_rule() {
        let mut c = QLearningController::new(0.0, 0.1);
        let a = Action::from_id(4).unwrap();
        c.observe(a, true);
        assert!((c.q_values()[3] - 0.1).abs() < 1e-15);
        c.observe(a, true);
        assert!((c.q_values()[3] - 0.19).abs() < 1e-15);
        let table = ActionTable::new();
        assert_eq!(only(c.select(&ctx(&table), &mut rng_from_seed(0))), a);
    }
}
