//! Prompt templates for the decision and scoring experts.
//!
//! Templates use `{{slot}}` placeholders. Rendering fails when a slot has no
//! value or when a placeholder marker survives substitution.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::experts::{Action, ActionTable, Budget, ScoringContext};
use crate::sampling::Population;

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}").unwrap());

/// System message shared by both experts.
pub const SYSTEM_PREAMBLE: &str = "You are an expert in surrogate-assisted evolutionary \
optimization of expensive black-box problems. Answer precisely and follow the requested \
output format.";

/// Decision request with self-reflection labels.
pub const DECISION_TEMPLATE: &str = "\
We are minimizing an expensive black-box function with a surrogate-assisted evolutionary \
algorithm. Each action pairs a surrogate model with an infill sampling criterion. For every \
action, S is its average score so far (0 to 10, higher means its solutions were better) and V \
is the fraction of past iterations in which it was executed.

{{action_table}}

Maximum function evaluations (MFEs): {{max_evaluations}}
Function evaluations used (FEs): {{used_evaluations}}
Remaining evaluations: {{remaining_evaluations}}
Iteration: {{iteration}}

Weigh exploitation of actions with high S against exploration of rarely used actions, taking \
the remaining budget into account. Select one or more actions. Then reflect on each choice and \
label it certain if you are confident it is a good choice now, or uncertain otherwise.

{{answer_format}}";

/// Decision request that asks for a plain action list.
pub const DECISION_TEMPLATE_NO_LABELS: &str = "\
We are minimizing an expensive black-box function with a surrogate-assisted evolutionary \
algorithm. Each action pairs a surrogate model with an infill sampling criterion. For every \
action, S is its average score so far (0 to 10, higher means its solutions were better) and V \
is the fraction of past iterations in which it was executed.

{{action_table}}

Maximum function evaluations (MFEs): {{max_evaluations}}
Function evaluations used (FEs): {{used_evaluations}}
Remaining evaluations: {{remaining_evaluations}}
Iteration: {{iteration}}

Weigh exploitation of actions with high S against exploration of rarely used actions, taking \
the remaining budget into account. Select one or more actions.

{{answer_format}}";

pub const ANSWER_FORMAT_LABELED: &str = "\
Answer with one line per selected action and nothing else, in the form
Action <id>: certain
or
Action <id>: uncertain
where <id> is between 1 and 8.";

pub const ANSWER_FORMAT_PLAIN: &str = "\
Answer with one line per selected action and nothing else, in the form
Action <id>
where <id> is between 1 and 8.";

pub const SCORING_TEMPLATE: &str = "\
We are minimizing an expensive black-box function. The current population holds the \
{{population_size}} best solutions found so far, sorted from best to worst by objective value \
(lower is better):

{{population}}

A new solution was just evaluated:
{{candidate}}

Rate the quality of the new solution relative to the population on an integer scale from 0 \
(worse than every member) to 10 (better than every member).

Answer with a single line of the form
Score: <0-10>";

/// A text with `{{slot}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for cap in SLOT.captures_iter(&self.text) {
            let name = cap[1].to_string();
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String> {
        let mut missing = None;
        let out = SLOT.replace_all(&self.text, |cap: &regex::Captures<'_>| match values.get(&cap[1]) {
            Some(v) => v.clone(),
            None => {
                missing.get_or_insert_with(|| cap[1].to_string());
                String::new()
            }
        });
        if let Some(name) = missing {
            return Err(Error::Template(format!("no value for slot {name:?}")));
        }
        if out.contains("{{") || out.contains("}}") {
            return Err(Error::Template(
                "unresolved placeholder marker in rendered prompt".into(),
            ));
        }
        Ok(out.into_owned())
    }
}

/// One line per action: id, pair, average score and frequency.
pub fn action_table(stats: &ActionTable) -> String {
    Action::ALL
        .iter()
        .map(|a| {
            let s = stats.get(*a);
            format!(
                "Action {} | {} | S={:.3} | V={:.3}",
                a.id(),
                a.describe(),
                s.score,
                s.frequency
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Decision prompt; `with_labels` selects the self-reflection variant.
pub fn render_decision_prompt(
    stats: &ActionTable,
    budget: Budget,
    iteration: u64,
    with_labels: bool,
) -> Result<String> {
    let (template, format) = if with_labels {
        (DECISION_TEMPLATE, ANSWER_FORMAT_LABELED)
    } else {
        (DECISION_TEMPLATE_NO_LABELS, ANSWER_FORMAT_PLAIN)
    };
    let values = BTreeMap::from([
        ("action_table", action_table(stats)),
        ("max_evaluations", budget.max_evaluations.to_string()),
        ("used_evaluations", budget.used.to_string()),
        ("remaining_evaluations", budget.remaining().to_string()),
        ("iteration", iteration.to_string()),
        ("answer_format", format.to_string()),
    ]);
    PromptTemplate::new(template).render(&values)
}

/// One `Solution i: f = ...` line per member, best first.
pub fn population_summary(population: &Population) -> String {
    population
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| format!("Solution {}: f = {:.6e}", i + 1, m.value))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_scoring_prompt(population: &Population, candidate_value: f64) -> Result<String> {
    let values = BTreeMap::from([
        ("population_size", population.len().to_string()),
        ("population", population_summary(population)),
        ("candidate", format!("New solution: f = {candidate_value:.6e}")),
    ]);
    PromptTemplate::new(SCORING_TEMPLATE).render(&values)
}

pub fn render_scoring_context(ctx: &ScoringContext<'_>) -> Result<String> {
    render_scoring_prompt(ctx.population, ctx.candidate.value)
}
