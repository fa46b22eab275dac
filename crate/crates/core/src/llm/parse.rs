//! Tolerant extraction of verdicts and scores from free-form replies.
//!
//! Action mentions are `Action 3`, `action #3`, `a3`, or a bare id opening a
//! line (`3: certain`, `3) uncertain`). The label of a mention is the first
//! `certain`/`uncertain` token between it and the next mention.

use std::sync::LazyLock;

use regex::Regex;

use crate::experts::{Action, Confidence, ExpertVerdict};

static MENTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)\b(?:action\s*#?\s*|a)([1-8])\b|^[\s*\-]*([1-8])\s*[:.)\-]").unwrap());
static LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(un)?certain\b").unwrap());
static SCORE_KEY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bscore\b\s*(?:is|of|=|:)?\s*(-?\d+(?:\.\d+)?)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").unwrap());

/// Action mentions as (action, start, end) in order of appearance.
fn mentions(text: &str) -> Vec<(Action, usize, usize)> {
    MENTION
        .captures_iter(text)
        .filter_map(|cap| {
            let m = cap.get(1).or_else(|| cap.get(2))?;
            let id: u8 = m.as_str().parse().ok()?;
            let whole = cap.get(0)?;
            Some((Action::from_id(id)?, whole.start(), whole.end()))
        })
        .collect()
}

/// Labeled action mentions; `None` when no mention carries a label.
pub fn parse_decision_reply(text: &str) -> Option<ExpertVerdict> {
    let found = mentions(text);
    let mut entries = Vec::new();
    for (k, (action, _, end)) in found.iter().enumerate() {
        let stop = found.get(k + 1).map_or(text.len(), |next| next.1);
        if let Some(cap) = LABEL.captures(&text[*end..stop]) {
            let label = if cap.get(1).is_some() {
                Confidence::Uncertain
            } else {
                Confidence::Certain
            };
            entries.push((*action, label));
        }
    }
    ExpertVerdict::new(entries)
}

/// Every action mention, labels ignored; `None` when there is none.
pub fn parse_action_list(text: &str) -> Option<Vec<Action>> {
    let actions: Vec<Action> = mentions(text).into_iter().map(|m| m.0).collect();
    (!actions.is_empty()).then_some(actions)
}

/// The number after a `score` keyword, else the first number in `[0, 10]`.
///
/// A keyed number outside the scale is returned as is so the caller can clamp
/// and flag it.
pub fn parse_score_reply(text: &str) -> Option<f64> {
    if let Some(cap) = SCORE_KEY.captures(text) {
        if let Ok(v) = cap[1].parse::<f64>() {
            return Some(v);
        }
    }
    NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .find(|v| (0.0..=10.0).contains(v))
}
