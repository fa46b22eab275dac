use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{Action, SelectionMode};
use crate::infill::InfillParams;
use crate::llm::ChatConfig;
use crate::sampling::DeConfig;
use crate::surrogates::GpConfig;

/// Where decision verdicts come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    /// Remote chat model.
    Llm,
    /// Epsilon-greedy local policy.
    Mock,
    /// Local policy whose confidence labels track the evidence.
    Calibrated,
}

impl BackendKind {
    fn prefix(self) -> &'static str {
        match self {
            Self::Llm => "llm",
            Self::Mock => "mock",
            Self::Calibrated => "calibrated",
        }
    }
}

/// How the expert pair is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpertMode {
    /// Labels honored; uncertain picks replaced by roulette draws.
    Full,
    /// Labels neither requested nor used.
    NoSrc,
    /// Only certain picks are kept.
    SrcCertainOnly,
    /// Full decisions, percentile grading instead of the scoring expert.
    SingleExpert,
}

impl ExpertMode {
    fn suffix(self) -> &'static str {
        match self {
            Self::Full => "",
            Self::NoSrc => "-no-src",
            Self::SrcCertainOnly => "-src-certain",
            Self::SingleExpert => "-single-expert",
        }
    }

    pub fn selection_mode(self) -> SelectionMode {
        match self {
            Self::Full | Self::SingleExpert => SelectionMode::Full,
            Self::NoSrc => SelectionMode::IgnoreLabels,
            Self::SrcCertainOnly => SelectionMode::CertainOnly,
        }
    }
}

/// Action selection strategy of a run.
///
/// Text form: `llm`, `mock` or `calibrated`, optionally followed by
/// `-no-src`, `-src-certain` or `-single-expert`; `fixed-a1` to `fixed-a8`;
/// `seq`; `random`; `alter`; `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Expert { backend: BackendKind, mode: ExpertMode },
    Fixed(Action),
    Seq,
    Random,
    Alter,
    QLearning,
}

impl Strategy {
    pub const MOCK: Strategy = Strategy::Expert {
        backend: BackendKind::Mock,
        mode: ExpertMode::Full,
    };

    /// Every strategy that runs without network access.
    pub fn offline() -> Vec<Strategy> {
        let mut all = Vec::new();
        for backend in [BackendKind::Mock, BackendKind::Calibrated] {
            for mode in [
                ExpertMode::Full,
                ExpertMode::NoSrc,
                ExpertMode::SrcCertainOnly,
                ExpertMode::SingleExpert,
            ] {
                all.push(Strategy::Expert { backend, mode });
            }
        }
        all.extend(Action::ALL.map(Strategy::Fixed));
        all.extend([Strategy::Seq, Strategy::Random, Strategy::Alter, Strategy::QLearning]);
        all
    }

    pub fn needs_network(self) -> bool {
        matches!(
            self,
            Strategy::Expert {
                backend: BackendKind::Llm,
                ..
            }
        )
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expert { backend, mode } => write!(f, "{}{}", backend.prefix(), mode.suffix()),
            Self::Fixed(a) => write!(f, "fixed-{a}"),
            Self::Seq => f.write_str("seq"),
            Self::Random => f.write_str("random"),
            Self::Alter => f.write_str("alter"),
            Self::QLearning => f.write_str("q"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let simple = match s.as_str() {
            "seq" => Some(Self::Seq),
            "random" => Some(Self::Random),
            "alter" => Some(Self::Alter),
            "q" | "qlearning" | "q-learning" => Some(Self::QLearning),
            _ => None,
        };
        if let Some(st) = simple {
            return Ok(st);
        }
        if let Some(rest) = s.strip_prefix("fixed-") {
            let id = rest.trim_start_matches('a').parse::<u8>().ok();
            return id
                .and_then(Action::from_id)
                .map(Self::Fixed)
                .ok_or_else(|| Error::Config(format!("unknown fixed action in {s:?}")));
        }
        for backend in [BackendKind::Calibrated, BackendKind::Mock, BackendKind::Llm] {
            if let Some(rest) = s.strip_prefix(backend.prefix()) {
                for mode in [
                    ExpertMode::Full,
                    ExpertMode::NoSrc,
                    ExpertMode::SrcCertainOnly,
                    ExpertMode::SingleExpert,
                ] {
                    if rest == mode.suffix() {
                        return Ok(Self::Expert { backend, mode });
                    }
                }
            }
        }
        Err(Error::Config(format!("unknown strategy {s:?}")))
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

/// Hyperparameters of the surrogates, criteria and baseline controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmParams {
    pub de: DeConfig,
    pub gp: GpConfig,
    pub infill: InfillParams,
    pub prs_degree: usize,
    pub knn_k: usize,
    /// Population of the surrogate local search; defaults to `N`.
    pub local_search_pop: Option<usize>,
    pub mock_epsilon: f64,
    pub calibrated_min_trials: u64,
    pub q_epsilon: f64,
    pub q_alpha: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            de: DeConfig::default(),
            gp: GpConfig::default(),
            infill: InfillParams::default(),
            prs_degree: 2,
            knn_k: 5,
            local_search_pop: None,
            mock_epsilon: 0.2,
            calibrated_min_trials: 3,
            q_epsilon: 0.1,
            q_alpha: 0.1,
        }
    }
}

impl AlgorithmParams {
    pub fn validate(&self) -> Result<()> {
        self.de.validate()?;
        self.infill.validate()?;
        if !(1..=2).contains(&self.prs_degree) {
            return Err(Error::Config("prs_degree must be 1 or 2".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        if self.local_search_pop.is_some_and(|p| p == 0) {
            return Err(Error::Config("local_search_pop must be positive".into()));
        }
        for (name, v) in [
            ("mock_epsilon", self.mock_epsilon),
            ("q_epsilon", self.q_epsilon),
            ("q_alpha", self.q_alpha),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.gp.starts == 0 || self.gp.max_evals_per_start == 0 {
            return Err(Error::Config("GP needs at least one start and one evaluation".into()));
        }
        Ok(())
    }
}

/// Everything that defines one run besides the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub population_size: usize,
    pub max_evaluations: usize,
    pub seed: u64,
    pub strategy: Strategy,
    #[serde(default)]
    pub params: AlgorithmParams,
    #[serde(default)]
    pub chat: ChatConfig,
    /// JSON-lines log of every chat exchange.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(population_size: usize, max_evaluations: usize, seed: u64, strategy: Strategy) -> Self {
        Self {
            population_size,
            max_evaluations,
            seed,
            strategy,
            params: AlgorithmParams::default(),
            chat: ChatConfig::default(),
            transcript: None,
        }
    }

    /// Full check, including the chat settings when the strategy needs them.
    pub fn validate(&self) -> Result<()> {
        self.validate_core()?;
        if self.strategy.needs_network() {
            self.chat.validate()?;
        }
        Ok(())
    }

    /// `N >= 4` and `N <= MFEs` (`N == MFEs` gives an initialization-only
    /// run), plus the algorithm parameters.
    pub fn validate_core(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Config(format!(
                "population size must be at least 4, got {}",
                self.population_size
            )));
        }
        if self.max_evaluations < self.population_size {
            return Err(Error::Config(format!(
                "evaluation budget {} is smaller than the population size {}",
                self.max_evaluations, self.population_size
            )));
        }
        self.params.validate()
    }
}
