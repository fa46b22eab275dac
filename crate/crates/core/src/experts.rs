//! Action portfolio, per-action statistics, and the two expert protocols.
//!
//! The decision expert proposes actions with a confidence label each;
//! certain picks are taken as is, uncertain ones are replaced by a softmax
//! roulette draw over the average scores. The scoring expert grades every
//! evaluated candidate on a 0 to 10 scale, which feeds the running averages.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::llm::mock::mock_score;
use crate::sampling::{EvaluatedSolution, Population};
use crate::RunRng;

/// Upper end of the score scale.
pub const MAX_SCORE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    Gp,
    Rbf,
    Prs,
    Knn,
}

impl SurrogateKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gp => "GP",
            Self::Rbf => "RBF",
            Self::Prs => "PRS",
            Self::Knn => "KNN",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Lcb,
    Ei,
    Prescreening,
    LocalSearch,
    L1Exploit,
    L1Explore,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lcb => "LCB",
            Self::Ei => "EI",
            Self::Prescreening => "Prescreening",
            Self::LocalSearch => "Local search",
            Self::L1Exploit => "L1-exploitation",
            Self::L1Explore => "L1-exploration",
        }
    }
}

/// One of the eight (surrogate, criterion) pairs, identified by 1..=8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Action(u8);

const PAIRS: [(SurrogateKind, Criterion); 8] = [
    (SurrogateKind::Gp, Criterion::Lcb),
    (SurrogateKind::Gp, Criterion::Ei),
    (SurrogateKind::Rbf, Criterion::Prescreening),
    (SurrogateKind::Rbf, Criterion::LocalSearch),
    (SurrogateKind::Prs, Criterion::Prescreening),
    (SurrogateKind::Prs, Criterion::LocalSearch),
    (SurrogateKind::Knn, Criterion::L1Exploit),
    (SurrogateKind::Knn, Criterion::L1Explore),
];

impl Action {
    pub const COUNT: usize = 8;
    pub const ALL: [Action; 8] = [
        Action(1),
        Action(2),
        Action(3),
        Action(4),
        Action(5),
        Action(6),
        Action(7),
        Action(8),
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        (1..=8).contains(&id).then_some(Self(id))
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based position in [`Action::ALL`].
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn model(self) -> SurrogateKind {
        PAIRS[self.index()].0
    }

    pub fn criterion(self) -> Criterion {
        PAIRS[self.index()].1
    }

    /// `(GP, LCB)` style description.
    pub fn describe(self) -> String {
        format!("({}, {})", self.model().name(), self.criterion().name())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(id: u8) -> Result<Self, Self::Error> {
        Action::from_id(id).ok_or_else(|| format!("action id must lie in 1..=8, got {id}"))
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.0
    }
}

/// Running average score `S`, selection frequency `V` and count `T`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub score: f64,
    pub frequency: f64,
    pub count: u64,
}

/// Folds score `s` into `stats`; `t` is the number of actions executed
/// before this one, across all actions.
pub fn score_and_update(stats: ActionStats, t: u64, s: f64) -> ActionStats {
    let count = stats.count + 1;
    ActionStats {
        score: (stats.count as f64 * stats.score + s) / count as f64,
        frequency: count as f64 / (t + 1) as f64,
        count,
    }
}

/// Statistics of all eight actions plus the executed-action counter `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionTable {
    stats: [ActionStats; 8],
    t: u64,
}

impl ActionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, action: Action) -> ActionStats {
        self.stats[action.index()]
    }

    pub fn all(&self) -> &[ActionStats; 8] {
        &self.stats
    }

    /// Number of actions executed so far.
    pub fn executed(&self) -> u64 {
        self.t
    }

    pub fn scores(&self) -> [f64; 8] {
        self.stats.map(|s| s.score)
    }

    /// Records one executed action with its score. Frequencies of all
    /// actions are refreshed so that `V = T / t` holds everywhere.
    pub fn record(&mut self, action: Action, score: f64) {
        let i = action.index();
        self.stats[i] = score_and_update(self.stats[i], self.t, score);
        self.t += 1;
        let t = self.t as f64;
        for s in &mut self.stats {
            s.frequency = s.count as f64 / t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    Certain,
    Uncertain,
}

impl Confidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Certain => "certain",
            Self::Uncertain => "uncertain",
        }
    }
}

/// Ordered actions with a confidence label each; never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertVerdict {
    entries: Vec<(Action, Confidence)>,
}

impl ExpertVerdict {
    pub fn new(entries: Vec<(Action, Confidence)>) -> Option<Self> {
        (!entries.is_empty()).then_some(Self { entries })
    }

    pub fn single(action: Action, label: Confidence) -> Self {
        Self {
            entries: vec![(action, label)],
        }
    }

    pub fn entries(&self) -> &[(Action, Confidence)] {
        &self.entries
    }

    pub fn actions(&self) -> Vec<Action> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn labels(&self) -> Vec<Confidence> {
        self.entries.iter().map(|e| e.1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: usize,
    pub used: usize,
}

impl Budget {
    pub fn remaining(&self) -> usize {
        self.max_evaluations.saturating_sub(self.used)
    }
}

/// Inputs of one decision request.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub stats: &'a ActionTable,
    pub budget: Budget,
    /// One-based number of the decision being made.
    pub iteration: u64,
}

/// Inputs of one grading request.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub population: &'a Population,
    pub candidate: &'a EvaluatedSolution,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("unparseable reply: {0}")]
    Parse(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

/// Source of action proposals.
pub trait DecisionBackend: Send {
    fn propose(&mut self, ctx: &DecisionContext<'_>, rng: &mut RunRng) -> Result<ExpertVerdict, BackendError>;
}

/// Source of candidate grades on the 0 to 10 scale.
pub trait ScoringBackend: Send {
    fn score(&mut self, ctx: &ScoringContext<'_>) -> Result<f64, BackendError>;
}

/// How the labels of a verdict are honored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Certain entries are kept, uncertain ones go to the roulette.
    Full,
    /// Every entry is kept regardless of its label.
    IgnoreLabels,
    /// Only certain entries are kept; one roulette draw if none remain.
    CertainOnly,
}

/// Why an action entered the selected set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Init,
    Certain,
    Roulette,
    Fallback,
    Strategy,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Init => "init",
            Self::Certain => "certain",
            Self::Roulette => "roulette",
            Self::Fallback => "fallback",
            Self::Strategy => "strategy",
        }
    }
}

impl std::str::FromStr for LabelSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "init" => Self::Init,
            "certain" => Self::Certain,
            "roulette" => Self::Roulette,
            "fallback" => Self::Fallback,
            "strategy" => Self::Strategy,
            _ => return Err(format!("unknown label source {s:?}")),
        })
    }
}

/// Deduplicated, insertion-ordered set of actions with their provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    entries: Vec<(Action, LabelSource)>,
}

impl Selection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(action: Action, source: LabelSource) -> Self {
        let mut s = Self::new();
        s.insert(action, source);
        s
    }

    /// Adds `action` unless present; returns whether it was added.
    pub fn insert(&mut self, action: Action, source: LabelSource) -> bool {
        if self.contains(action) {
            return false;
        }
        self.entries.push((action, source));
        true
    }

    pub fn contains(&self, action: Action) -> bool {
        self.entries.iter().any(|e| e.0 == action)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Action, LabelSource)] {
        &self.entries
    }

    pub fn actions(&self) -> Vec<Action> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Removes and returns a uniformly chosen entry.
    pub fn pop_random<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(Action, LabelSource)> {
        if self.entries.is_empty() {
            return None;
        }
        let i = rng.random_range(0..self.entries.len());
        Some(self.entries.remove(i))
    }
}

/// Max-shifted softmax.
pub fn softmax_probs(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Draws an index with probability proportional to `probs`.
pub fn roulette_wheel<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u at the very top; take the last positive slot.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// One softmax roulette draw over the average scores of all actions.
pub fn roulette_action<R: Rng + ?Sized>(table: &ActionTable, rng: &mut R) -> Action {
    Action::from_index(roulette_wheel(&softmax_probs(&table.scores()), rng))
}

/// Outcome of one decision round.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub selection: Selection,
    /// The backend's verdict as used, after truncation; `None` on failure.
    pub verdict: Option<ExpertVerdict>,
    pub error: Option<BackendError>,
}

/// Queries the decision backend and turns its verdict into a selection.
///
/// A failed backend yields one roulette draw tagged [`LabelSource::Fallback`].
/// Verdicts longer than eight entries are truncated.
pub fn decide(
    ctx: &DecisionContext<'_>,
    backend: &mut dyn DecisionBackend,
    mode: SelectionMode,
    rng: &mut RunRng,
) -> Decision {
    let verdict = match backend.propose(ctx, rng) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("decision backend failed ({e}); falling back to roulette");
            let action = roulette_action(ctx.stats, rng);
            return Decision {
                selection: Selection::single(action, LabelSource::Fallback),
                verdict: None,
                error: Some(e),
            };
        }
    };
    let mut entries = verdict.entries;
    if entries.len() > Action::COUNT {
        log::warn!(
            "decision verdict has {} entries; ignoring all past the first {}",
            entries.len(),
            Action::COUNT
        );
        entries.truncate(Action::COUNT);
    }

    let mut selection = Selection::new();
    for &(action, label) in &entries {
        match (mode, label) {
            (SelectionMode::IgnoreLabels, _) | (_, Confidence::Certain) => {
                selection.insert(action, LabelSource::Certain);
            }
            (SelectionMode::Full, Confidence::Uncertain) => {
                selection.insert(roulette_action(ctx.stats, rng), LabelSource::Roulette);
            }
            (SelectionMode::CertainOnly, Confidence::Uncertain) => {}
        }
    }
    if selection.is_empty() {
        selection.insert(roulette_action(ctx.stats, rng), LabelSource::Roulette);
    }
    Decision {
        selection,
        verdict: Some(ExpertVerdict { entries }),
        error: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradeSource {
    Expert,
    /// The expert answered outside the scale and was clamped.
    Clamped,
    /// The expert failed and the percentile rule was used.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub score: f64,
    pub source: GradeSource,
}

/// Asks the scoring backend for a grade, clamping to `[0, 10]` and falling
/// back to the percentile rule on failure.
pub fn grade(ctx: &ScoringContext<'_>, backend: &mut dyn ScoringBackend) -> Grade {
    match backend.score(ctx) {
        Ok(s) if s.is_finite() && (0.0..=MAX_SCORE).contains(&s) => Grade {
            score: s,
            source: GradeSource::Expert,
        },
        Ok(s) if !s.is_nan() => {
            log::warn!("score {s} outside [0, {MAX_SCORE}]; clamped");
            Grade {
                score: s.clamp(0.0, MAX_SCORE),
                source: GradeSource::Clamped,
            }
        }
        Ok(_) => fallback_grade(ctx, "NaN score"),
        Err(e) => fallback_grade(ctx, &e.to_string()),
    }
}

fn fallback_grade(ctx: &ScoringContext<'_>, why: &str) -> Grade {
    log::warn!("scoring backend failed ({why}); using percentile score");
    Grade {
        score: mock_score(ctx.population, ctx.candidate.value),
        source: GradeSource::Fallback,
    }
}
