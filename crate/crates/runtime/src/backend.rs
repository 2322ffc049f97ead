//! Decision backends behind the orchestrator and worker decision functions.

use std::collections::VecDeque;
use std::thread;
use std::time::Duration;

use infoflow_core::script::{request_text, Script, ScriptGap, Segment, SegmentRole};
use infoflow_core::TokenUsage;
use serde::{Deserialize, Serialize};

use crate::bus::Bus;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    ScriptGap(#[from] ScriptGap),
    #[error("backend failed after {attempts} attempts: {message}")]
    Failure { attempts: u32, message: String },
    #[error("context is empty or does not start with the role prompt")]
    BadContext,
    #[error("replay diverged: {0}")]
    Replay(String),
}

pub trait Backend: Send {
    fn complete(&mut self, context: &[Segment]) -> Result<Completion, BackendError>;
}

fn check_context(context: &[Segment]) -> Result<(), BackendError> {
    match context.first() {
        Some(s) if s.role == SegmentRole::System => Ok(()),
        _ => Err(BackendError::BadContext),
    }
}

/// Table-driven policy; usage is estimated over the request and reply text.
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&mut self, context: &[Segment]) -> Result<Completion, BackendError> {
        check_context(context)?;
        let text = self.script.respond(context)?;
        let usage = TokenUsage::estimate(&request_text(context), &text);
        Ok(Completion { text, usage })
    }
}

/// One recorded backend step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recorded {
    Completion(Completion),
    Gap(String),
    Failure(String),
}

/// Plays back recorded completions in order.
pub struct ReplayBackend {
    queue: VecDeque<Recorded>,
}

impl ReplayBackend {
    pub fn new(queue: impl IntoIterator<Item = Recorded>) -> Self {
        Self { queue: queue.into_iter().collect() }
    }
}

impl Backend for ReplayBackend {
    fn complete(&mut self, context: &[Segment]) -> Result<Completion, BackendError> {
        check_context(context)?;
        match self.queue.pop_front() {
            Some(Recorded::Completion(c)) => Ok(c),
            Some(Recorded::Gap(observation)) => Err(BackendError::ScriptGap(ScriptGap { observation })),
            Some(Recorded::Failure(message)) => Err(BackendError::Failure { attempts: 1, message }),
            None => Err(BackendError::Replay("more completions requested than recorded".into())),
        }
    }
}

/// Never answers before the session ends; used to exercise the budget.
pub struct StallingBackend {
    bus: Bus,
    limit: Duration,
}

impl StallingBackend {
    pub fn new(bus: Bus, limit: Duration) -> Self {
        Self { bus, limit }
    }
}

impl Backend for StallingBackend {
    fn complete(&mut self, _context: &[Segment]) -> Result<Completion, BackendError> {
        self.bus.wait_closed(self.limit);
        Err(BackendError::Failure { attempts: 1, message: "stalled".into() })
    }
}

/// Endpoint settings for a chat-completion server.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    120_000
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// Blocking chat-completion client. Temperature is always 0.
#[derive(Clone)]
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let api_key = config.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent, api_key }
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Result<(String, Option<Usage>), Attempt> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(format!("HTTP {status}")));
        }
        let parsed: ChatResponse =
            resp.body_mut().read_json().map_err(|e| Attempt::Fatal(format!("bad response body: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Attempt::Fatal("response has no message content".into()))?;
        Ok((text, parsed.usage))
    }
}

impl Backend for RemoteBackend {
    fn complete(&mut self, context: &[Segment]) -> Result<Completion, BackendError> {
        check_context(context)?;
        let body = ChatRequest {
            model: &self.config.model,
            temperature: 0.0,
            messages: context.iter().map(|s| ChatMessage { role: s.role.as_str(), content: &s.text }).collect(),
        };
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok((text, usage)) => {
                    let usage = match usage {
                        Some(u) => TokenUsage::reported(u.prompt_tokens, u.completion_tokens),
                        None => TokenUsage::estimate(&request_text(context), &text),
                    };
                    return Ok(Completion { text, usage });
                }
                Err(Attempt::Fatal(message)) => return Err(BackendError::Failure { attempts, message }),
                Err(Attempt::Retry(message)) if attempts > self.config.retries => {
                    return Err(BackendError::Failure { attempts, message })
                }
                Err(Attempt::Retry(_)) => {
                    thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}
