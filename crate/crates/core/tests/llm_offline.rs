//! The chat-model path without a network: prompts against golden files, the
//! parser against a fixture corpus, and whole runs with a dead transport.
//!
//! Golden files are rewritten when `UPDATE_GOLDEN` is set.

use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use llm_saea::benchmarks::make_classical;
use llm_saea::experts::*;
use llm_saea::llm::client::ChatTransport;
use llm_saea::llm::*;
use llm_saea::orchestrator::{run_with, ExpertController, RunConfig, Strategy};
use llm_saea::sampling::{EvaluatedSolution, Population};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

fn a(id: u8) -> Action {
    Action::from_id(id).unwrap()
}

fn sample_table() -> ActionTable {
    let mut t = ActionTable::new();
    for (id, s) in [(1, 7.0), (3, 4.0), (1, 9.0), (8, 0.0), (5, 6.0), (1, 8.0)] {
        t.record(a(id), s);
    }
    t
}

const BUDGET: Budget = Budget {
    max_evaluations: 1000,
    used: 106,
};

#[test]
fn decision_prompts_match_golden() {
    let labeled = render_decision_prompt(&sample_table(), BUDGET, 7, true).unwrap();
    check_golden("decision_prompt.txt", &labeled);
    let plain = render_decision_prompt(&sample_table(), BUDGET, 7, false).unwrap();
    check_golden("decision_prompt_plain.txt", &plain);
}

#[test]
fn scoring_prompt_matches_golden() {
    let members = (0..5)
        .map(|i| EvaluatedSolution {
            x: vec![i as f64],
            value: 1.5 * i as f64 + 0.25,
            index: i,
        })
        .collect();
    let prompt = render_scoring_prompt(&Population::from_members(members), 2.0).unwrap();
    check_golden("scoring_prompt.txt", &prompt);
}

#[derive(Deserialize)]
struct Reply {
    kind: String,
    reply: String,
    expect: serde_json::Value,
}

fn label(s: &str) -> Confidence {
    match s {
        "certain" => Confidence::Certain,
        "uncertain" => Confidence::Uncertain,
        other => panic!("bad label {other}"),
    }
}

#[test]
fn fixture_corpus_parses_without_crashing() {
    let text = fs::read_to_string(fixture("replies.json")).unwrap();
    let corpus: Vec<Reply> = serde_json::from_str(&text).unwrap();
    assert_eq!(corpus.len(), 20);
    for (k, r) in corpus.iter().enumerate() {
        let outcome = std::panic::catch_unwind(|| match r.kind.as_str() {
            "decision" => {
                let got = parse_decision_reply(&r.reply).map(|v| v.entries().to_vec());
                let want = (!r.expect.is_null()).then(|| {
                    r.expect
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|e| (a(e[0].as_u64().unwrap() as u8), label(e[1].as_str().unwrap())))
                        .collect::<Vec<_>>()
                });
                assert_eq!(got, want, "reply {k}: {:?}", r.reply);
            }
            _ => assert_eq!(
                parse_score_reply(&r.reply),
                r.expect.as_f64(),
                "reply {k}: {:?}",
                r.reply
            ),
        });
        assert!(outcome.is_ok(), "reply {k} crashed the parser");
    }
}

/// Transport whose every call fails, counting the attempts.
struct DeadLine(Arc<Mutex<usize>>);

impl ChatTransport for DeadLine {
    fn complete(&mut self, _: &[ChatMessage]) -> Result<String, BackendError> {
        *self.0.lock().unwrap() += 1;
        Err(BackendError::Transport("connection refused".into()))
    }
}

#[test]
fn dead_network_still_finishes_the_run() {
    let calls = Arc::new(Mutex::new(0));
    let dir = tempfile::tempdir().unwrap();
    let transcript = Transcript::create(dir.path().join("t.jsonl")).unwrap();
    let decision = LlmDecisionExpert::new(Box::new(DeadLine(calls.clone())), true).with_transcript(transcript.clone());
    let scoring = LlmScoringExpert::new(Box::new(DeadLine(calls.clone()))).with_transcript(transcript);
    let mut controller = ExpertController::new(Box::new(decision), Box::new(scoring), SelectionMode::Full);

    let problem = make_classical("rastrigin", 4).unwrap();
    let config = RunConfig::new(12, 40, 5, Strategy::MOCK);
    let out = run_with(&problem, &config, &mut controller).unwrap();

    assert_eq!(out.archive.len(), 40);
    assert_eq!(out.stats.executed(), 28);
    assert_eq!(out.backend_failures, out.decisions);
    let executed: Vec<_> = out.trace.rows.iter().filter(|r| r.action.is_some()).collect();
    assert!(executed.iter().all(|r| r.source == LabelSource::Fallback));
    // One decision call per decision, one scoring call per execution.
    assert_eq!(*calls.lock().unwrap(), out.decisions + 28);

    let log = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    let records: Vec<TranscriptRecord> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), out.decisions + 28);
    assert!(records.iter().all(|r| r.reply.is_none() && r.error.is_some()));
}

#[test]
fn unreachable_endpoint_fails_fast() {
    let config = ChatConfig {
        // Port 9 (discard) is closed on a normal host; the connection is refused.
        endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
        max_retries: 1,
        timeout_secs: 2.0,
        // Any variable that is always present will do as the key source.
        api_key_env: "PATH".into(),
        ..ChatConfig::default()
    };
    let mut t = HttpTransport::new(config).unwrap();
    let err = t.complete(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
}

#[test]
fn missing_key_is_reported_as_unavailable() {
    let config = ChatConfig {
        api_key_env: "LLM_SAEA_SURELY_UNSET_KEY".into(),
        ..ChatConfig::default()
    };
    let mut t = HttpTransport::new(config).unwrap();
    let err = t.complete(&[ChatMessage::user("hi")]).unwrap_err();
    assert!(matches!(err, BackendError::Unavailable(_)));
}

/// Canned replies cycled in order.
struct Script(Vec<&'static str>, usize);

impl ChatTransport for Script {
    fn complete(&mut self, _: &[ChatMessage]) -> Result<String, BackendError> {
        let r = self.0[self.1 % self.0.len()];
        self.1 += 1;
        Ok(r.to_string())
    }
}

#[test]
fn scripted_replies_drive_selection() {
    let decision = LlmDecisionExpert::new(
        Box::new(Script(
            vec!["Action 5: certain", "no idea", "Action 3: uncertain\nAction 6: certain"],
            0,
        )),
        true,
    );
    let scoring = LlmScoringExpert::new(Box::new(Script(vec!["Score: 6", "Score: 15", "???"], 0)));
    let mut controller = ExpertController::new(Box::new(decision), Box::new(scoring), SelectionMode::Full);
    let problem = make_classical("ellipsoid", 3).unwrap();
    let out = run_with(&problem, &RunConfig::new(10, 30, 1, Strategy::MOCK), &mut controller).unwrap();
    assert_eq!(out.archive.len(), 30);
    assert!(out.backend_failures > 0 && out.backend_failures < out.decisions);
    let scores: Vec<f64> = out.trace.rows.iter().filter_map(|r| r.score).collect();
    assert!(scores.iter().all(|s| (0.0..=10.0).contains(s)));
    assert!(scores.contains(&6.0) && scores.contains(&10.0));
}
