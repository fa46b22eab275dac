//! Surrogate-assisted evolutionary optimization for expensive black-box
//! problems, where the surrogate model and the infill sampling criterion are
//! chosen online by a decision expert and graded by a scoring expert.
//!
//! Both experts are pluggable: a chat-completion model ([`llm`]) or a
//! deterministic local policy ([`llm::mock`]) for offline, reproducible runs.
//! The main loop lives in [`orchestrator`]; [`harness`] drives batches of
//! runs and produces the summary statistics.

pub mod benchmarks;
pub mod error;
pub mod experts;
pub mod harness;
pub mod infill;
pub mod llm;
pub mod orchestrator;
pub mod sampling;
pub mod surrogates;

pub use error::{Error, Result};

/// Random number generator used by every stochastic component of a run.
///
/// ChaCha8 keeps streams identical across platforms and `rand` releases,
/// which the golden-run fixtures depend on.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Builds the run generator for `seed`.
pub fn rng_from_seed(seed: u64) -> RunRng {
    use rand::SeedableRng;
    RunRng::seed_from_u64(seed)
}
