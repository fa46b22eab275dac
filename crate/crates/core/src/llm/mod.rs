//! Expert backends: prompt rendering and reply parsing for a chat-completion
//! model, the HTTP client, and deterministic local stand-ins.

pub mod client;
pub mod mock;
pub mod parse;
pub mod prompt;

pub use client::{
    ChatConfig, ChatMessage, ChatTransport, HttpTransport, LlmDecisionExpert, LlmScoringExpert, Transcript,
    TranscriptRecord,
};
pub use mock::{mock_score, CalibratedMockDecision, MockDecision, MockScoring};
pub use parse::{parse_action_list, parse_decision_reply, parse_score_reply};
pub use prompt::{render_decision_prompt, render_scoring_prompt, PromptTemplate};
