//! Chat-completion client and the experts built on it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::parse::{parse_action_list, parse_decision_reply, parse_score_reply};
use super::prompt::{render_decision_prompt, render_scoring_context, SYSTEM_PREAMBLE};
use crate::error::{Error, Result};
use crate::experts::{
    BackendError, Confidence, DecisionBackend, DecisionContext, ExpertVerdict, ScoringBackend, ScoringContext,
};
use crate::RunRng;

/// Endpoint and request settings. The API key itself is only ever read
/// from the environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub api_key_env: String,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo-0125".into(),
            temperature: 0.0,
            max_retries: 2,
            timeout_secs: 30.0,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl ChatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config(format!(
                "chat timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.endpoint.is_empty() || self.model.is_empty() || self.api_key_env.is_empty() {
            return Err(Error::Config(
                "chat endpoint, model and key variable must be set".into(),
            ));
        }
        Ok(())
    }

    /// Worst-case wall time of one exchange.
    pub fn max_blocking(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs) * (self.max_retries + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// One synchronous request-response exchange.
pub trait ChatTransport: Send {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Transport speaking the chat-completion JSON protocol over HTTPS.
pub struct HttpTransport {
    config: ChatConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpTransport {
    /// Reads the API key from the configured environment variable; a
    /// missing key surfaces as a backend failure on every call.
    pub fn new(config: ChatConfig) -> Result<Self> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{} is not set; chat requests will fail", config.api_key_env);
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        Ok(Self { config, agent, api_key })
    }

    fn request(&self, key: &str, body: &Value) -> Result<String, String> {
        let response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        let value: Value = response.into_body().read_json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| BackendError::Unavailable(format!("{} is not set", self.config.api_key_env)))?;
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            match self.request(key, &body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("chat request attempt {} failed: {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(BackendError::Transport(last))
    }
}

/// One logged exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub iteration: u64,
    pub expert: String,
    pub prompt: String,
    pub reply: Option<String>,
    pub parsed: Value,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only JSON-lines log shared by the experts of a run.
#[derive(Clone)]
pub struct Transcript {
    sink: Arc<Mutex<BufWriter<File>>>,
}

impl Transcript {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::create(path.as_ref()).map_err(|source| Error::Read {
            path: path.as_ref().to_path_buf(),
            source,
        })?;
        Ok(Self {
            sink: Arc::new(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn record(&self, record: &TranscriptRecord) {
        let line = serde_json::to_string(record).expect("transcript records serialize");
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
            log::warn!("could not write transcript: {e}");
        }
    }
}

struct Exchange {
    reply: Result<String, BackendError>,
    latency_ms: u64,
}

fn exchange(transport: &mut dyn ChatTransport, prompt: &str) -> Exchange {
    let start = Instant::now();
    let reply = transport.complete(&[ChatMessage::system(SYSTEM_PREAMBLE), ChatMessage::user(prompt)]);
    Exchange {
        reply,
        latency_ms: start.elapsed().as_millis() as u64,
    }
}

fn log_exchange(
    transcript: Option<&Transcript>,
    iteration: u64,
    expert: &str,
    prompt: String,
    ex: &Exchange,
    parsed: Value,
    error: Option<String>,
) {
    if let Some(t) = transcript {
        t.record(&TranscriptRecord {
            iteration,
            expert: expert.into(),
            prompt,
            reply: ex.reply.as_ref().ok().cloned(),
            parsed,
            latency_ms: ex.latency_ms,
            error,
        });
    }
}

/// Decision expert backed by a chat model.
pub struct LlmDecisionExpert {
    transport: Box<dyn ChatTransport>,
    with_labels: bool,
    transcript: Option<Transcript>,
}

impl LlmDecisionExpert {
    /// `with_labels = false` asks for a plain action list; every returned
    /// action is then reported as certain.
    pub fn new(transport: Box<dyn ChatTransport>, with_labels: bool) -> Self {
        Self {
            transport,
            with_labels,
            transcript: None,
        }
    }

    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = Some(transcript);
        self
    }

    fn parse(&self, reply: &str) -> Option<ExpertVerdict> {
        if self.with_labels {
            parse_decision_reply(reply)
        } else {
            let actions = parse_action_list(reply)?;
            ExpertVerdict::new(actions.into_iter().map(|a| (a, Confidence::Certain)).collect())
        }
    }
}

impl DecisionBackend for LlmDecisionExpert {
    fn propose(&mut self, ctx: &DecisionContext<'_>, _rng: &mut RunRng) -> Result<ExpertVerdict, BackendError> {
        let prompt = render_decision_prompt(ctx.stats, ctx.budget, ctx.iteration, self.with_labels)
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let ex = exchange(self.transport.as_mut(), &prompt);
        let result = match &ex.reply {
            Ok(reply) => self
                .parse(reply)
                .ok_or_else(|| BackendError::Parse(format!("no actions in {reply:?}"))),
            Err(e) => Err(e.clone()),
        };
        let parsed = match &result {
            Ok(v) => serde_json::to_value(v.entries()).unwrap_or(Value::Null),
            Err(_) => Value::Null,
        };
        let error = result.as_ref().err().map(ToString::to_string);
        log_exchange(
            self.transcript.as_ref(),
            ctx.iteration,
            "decision",
            prompt,
            &ex,
            parsed,
            error,
        );
        result
    }
}

/// Scoring expert backed by a chat model.
pub struct LlmScoringExpert {
    transport: Box<dyn ChatTransport>,
    transcript: Option<Transcript>,
}

impl LlmScoringExpert {
    pub fn new(transport: Box<dyn ChatTransport>) -> Self {
        Self {
            transport,
            transcript: None,
        }
    }

    pub fn with_transcript(mut self, transcript: Transcript) -> Self {
        self.transcript = Some(transcript);
        self
    }
}

impl ScoringBackend for LlmScoringExpert {
    fn score(&mut self, ctx: &ScoringContext<'_>) -> Result<f64, BackendError> {
        let prompt = render_scoring_context(ctx).map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let ex = exchange(self.transport.as_mut(), &prompt);
        let result = match &ex.reply {
            Ok(reply) => parse_score_reply(reply).ok_or_else(|| BackendError::Parse(format!("no score in {reply:?}"))),
            Err(e) => Err(e.clone()),
        };
        let parsed = result.as_ref().map_or(Value::Null, |s| json!(s));
        let error = result.as_ref().err().map(ToString::to_string);
        log_exchange(
            self.transcript.as_ref(),
            ctx.iteration,
            "scoring",
            prompt,
            &ex,
            parsed,
            error,
        );
        result
    }
}
