//! Chat-completion boundary. The scripted mock is the default provider and
//! lets every other component run offline; the live client speaks the
//! common `/chat/completions` JSON shape.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    Tutor,
    Student,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn tutor(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Tutor,
            content: content.into(),
        }
    }

    pub fn student(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Student,
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider unavailable after {attempts} attempt(s): {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("malformed provider reply: {message}")]
    Protocol { message: String, raw: String },
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("mock script: {0}")]
    Script(String),
}

impl GatewayError {
    /// Whether the caller may retry the same turn later.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Unavailable { .. })
    }
}

pub trait ChatGateway: Send + Sync {
    /// Returns the next tutor utterance for `history`, which must start with
    /// the system prompt. `session_id` scopes mock positions.
    fn complete(&self, session_id: &str, history: &[ChatMessage]) -> Result<String, GatewayError>;
}

fn check_history(history: &[ChatMessage]) -> Result<(), GatewayError> {
    match history.first() {
        None => Err(GatewayError::InvalidRequest("history is empty".into())),
        Some(m) if m.role != ChatRole::System => Err(GatewayError::InvalidRequest(
            "history must start with the system message".into(),
        )),
        Some(_) => Ok(()),
    }
}

/// A request whose final message is a second system message asks for the
/// session summary rather than a tutoring turn.
pub fn is_summary_request(history: &[ChatMessage]) -> bool {
    history.len() > 1 && history.last().is_some_and(|m| m.role == ChatRole::System)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Live,
    Mock,
}

pub const ENV_ENDPOINT: &str = "TUTORLOOP_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "TUTORLOOP_LLM_API_KEY";
pub const ENV_MODEL: &str = "TUTORLOOP_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub provider: Provider,
    /// Full URL of the chat-completions resource.
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            provider: Provider::Mock,
            endpoint: None,
            credential_env: ENV_API_KEY.into(),
            model: "gpt-4".into(),
            temperature: 0.3,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_ms: 500,
        }
    }
}

impl GatewayConfig {
    /// Applies endpoint and model overrides from the environment. Selecting
    /// an endpoint this way also selects the live provider.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENV_ENDPOINT) {
            if !endpoint.trim().is_empty() {
                self.endpoint = Some(endpoint);
                self.provider = Provider::Live;
            }
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            if !model.trim().is_empty() {
                self.model = model;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.provider == Provider::Live {
            if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                return Err(GatewayError::Config("live provider requires an endpoint".into()));
            }
            if self.credential_env.trim().is_empty() {
                return Err(GatewayError::Config("live provider requires a credential".into()));
            }
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(GatewayError::Config("timeout must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config("temperature must be in [0, 2]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    #[serde(default)]
    contains: Option<String>,
    #[serde(default)]
    matches: Option<String>,
    reply: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    replies: Vec<String>,
    #[serde(default)]
    overrides: Vec<RawOverride>,
    terminal: Option<String>,
    #[serde(default)]
    summary: Option<String>,
}

#[derive(Debug, Clone)]
enum Predicate {
    Contains(String),
    Matches(Regex),
}

#[derive(Debug, Clone)]
struct Override {
    predicate: Predicate,
    reply: String,
}

impl Override {
    fn fires(&self, student_text: &str) -> bool {
        match &self.predicate {
            Predicate::Contains(s) => student_text.contains(s.as_str()),
            Predicate::Matches(re) => re.is_match(student_text),
        }
    }
}

/// Default reply to summary requests when a script does not supply one.
pub const DEFAULT_MOCK_SUMMARY: &str = "*Specific topics: Unknown\n\
*Action items regarding the student's response level: Unknown\n\
*Action items regarding the student's learning style: Unknown\n";

/// A validated mock script.
///
/// ```json
/// {"replies": ["Hi! Ready?", "Look at Question 1."],
///  "overrides": [{"contains": "A", "reply": "Correct!"}],
///  "terminal": "Well done today. FINISHED.",
///  "summary": "*Specific topics: ..."}
/// ```
#[derive(Debug, Clone)]
pub struct MockScript {
    replies: Vec<String>,
    overrides: Vec<Override>,
    terminal: String,
    summary: String,
}

impl MockScript {
    pub fn load(document: &str) -> Result<Self, GatewayError> {
        let raw: RawScript = serde_json::from_str(document).map_err(|e| GatewayError::Script(e.to_string()))?;
        if raw.replies.is_empty() {
            return Err(GatewayError::Script("reply list is empty".into()));
        }
        let terminal = raw
            .terminal
            .ok_or_else(|| GatewayError::Script("terminal reply is missing".into()))?;
        if !terminal.trim_end().ends_with("FINISHED.") {
            return Err(GatewayError::Script(
                "terminal reply must end with the FINISHED. sentinel".into(),
            ));
        }
        let mut overrides = Vec::new();
        for (k, o) in raw.overrides.into_iter().enumerate() {
            let predicate = match (o.contains, o.matches) {
                (Some(s), None) => Predicate::Contains(s),
                (None, Some(p)) => {
                    Predicate::Matches(Regex::new(&p).map_err(|e| GatewayError::Script(format!("override {k}: {e}")))?)
                }
                _ => {
                    return Err(GatewayError::Script(format!(
                        "override {k} needs exactly one of contains / matches"
                    )))
                }
            };
            overrides.push(Override {
                predicate,
                reply: o.reply,
            });
        }
        Ok(Self {
            replies: raw.replies,
            overrides,
            terminal,
            summary: raw.summary.unwrap_or_else(|| DEFAULT_MOCK_SUMMARY.to_string()),
        })
    }

    pub fn from_replies(replies: Vec<String>, terminal: &str) -> Result<Self, GatewayError> {
        let doc = serde_json::json!({ "replies": replies, "terminal": terminal });
        Self::load(&doc.to_string())
    }

    fn override_for(&self, history: &[ChatMessage]) -> Option<&str> {
        let last = history.last().filter(|m| m.role == ChatRole::Student)?;
        self.overrides
            .iter()
            .find(|o| o.fires(&last.content))
            .map(|o| o.reply.as_str())
    }

    /// Sequential position implied by a history: one per tutoring turn not
    /// answered by an override.
    fn position_from_history(&self, history: &[ChatMessage]) -> usize {
        let mut pos = 0;
        for end in 1..history.len() {
            if history[end].role == ChatRole::Tutor {
                let prefix = &history[..end];
                if self.override_for(prefix).is_none() {
                    pos += 1;
                }
            }
        }
        pos
    }
}

/// Replays a [`MockScript`] with an independent cursor per session.
///
/// A session seen for the first time starts at the position implied by its
/// history, so a restarted service continues a half-finished session where
/// it left off.
#[derive(Debug)]
pub struct MockGateway {
    script: MockScript,
    cursors: Mutex<HashMap<String, usize>>,
}

impl MockGateway {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            cursors: Mutex::new(HashMap::new()),
        }
    }
}

impl ChatGateway for MockGateway {
    fn complete(&self, session_id: &str, history: &[ChatMessage]) -> Result<String, GatewayError> {
        check_history(history)?;
        if is_summary_request(history) {
            return Ok(self.script.summary.clone());
        }
        if let Some(reply) = self.script.override_for(history) {
            return Ok(reply.to_string());
        }
        let mut cursors = self.cursors.lock().unwrap_or_else(|p| p.into_inner());
        let pos = cursors
            .entry(session_id.to_string())
            .or_insert_with(|| self.script.position_from_history(history));
        let reply = self.script.replies.get(*pos).unwrap_or(&self.script.terminal).clone();
        *pos += 1;
        Ok(reply)
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct LiveGateway {
    config: GatewayConfig,
    api_key: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    content: Option<String>,
}

enum Attempt {
    Transient(String),
    Fatal(GatewayError),
}

impl LiveGateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let api_key = std::env::var(&config.credential_env)
            .map_err(|_| GatewayError::Config(format!("environment variable {} is not set", config.credential_env)))?;
        Ok(Self::with_api_key(config, api_key))
    }

    pub fn with_api_key(config: GatewayConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, Attempt> {
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let mut resp = self
            .agent
            .post(endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::BadUri(_) | ureq::Error::Http(_) => Attempt::Fatal(GatewayError::Config(e.to_string())),
                other => Attempt::Transient(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        let raw = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(GatewayError::Protocol {
                message: format!("HTTP {status}"),
                raw,
            }));
        }
        let parsed: WireReply = serde_json::from_str(&raw).map_err(|e| {
            Attempt::Fatal(GatewayError::Protocol {
                message: e.to_string(),
                raw: raw.clone(),
            })
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                Attempt::Fatal(GatewayError::Protocol {
                    message: "reply has no message content".into(),
                    raw,
                })
            })
    }
}

impl ChatGateway for LiveGateway {
    fn complete(&self, _session_id: &str, history: &[ChatMessage]) -> Result<String, GatewayError> {
        check_history(history)?;
        let body = WireRequest {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: history
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        ChatRole::System => "system",
                        ChatRole::Tutor => "assistant",
                        ChatRole::Student => "user",
                    },
                    content: &m.content,
                })
                .collect(),
        };
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(last_error)) => {
                    if attempts > self.config.max_retries {
                        return Err(GatewayError::Unavailable { attempts, last_error });
                    }
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

/// Builds the configured provider. `mock_script` is required for the mock.
pub fn build_gateway(
    config: &GatewayConfig,
    mock_script: Option<MockScript>,
) -> Result<Box<dyn ChatGateway>, GatewayError> {
    config.validate()?;
    match config.provider {
        Provider::Mock => {
            let script = mock_script.ok_or_else(|| GatewayError::Config("mock provider needs a script".into()))?;
            Ok(Box::new(MockGateway::new(script)))
        }
        Provider::Live => Ok(Box::new(LiveGateway::new(config.clone())?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(doc: serde_json::Value) -> MockScript {
        MockScript::load(&doc.to_string()).unwrap()
    }

    fn opening() -> Vec<ChatMessage> {
        vec![ChatMessage::system("sys")]
    }

    #[test]
    fn replies_in_order_then_terminal() {
        let gw = MockGateway::new(MockScript::from_replies(vec!["r1".into(), "r2".into()], "Bye. FINISHED.").unwrap());
        let h = opening();
        assert_eq!(gw.complete("s", &h).unwrap(), "r1");
        assert_eq!(gw.complete("s", &h).unwrap(), "r2");
        assert_eq!(gw.complete("s", &h).unwrap(), "Bye. FINISHED.");
        assert_eq!(gw.complete("s", &h).unwrap(), "Bye. FINISHED.");
    }

    #[test]
    fn five_replies_then_terminal() {
        let replies: Vec<String> = (1..=5).map(|k| format!("r{k}")).collect();
        let gw = MockGateway::new(MockScript::from_replies(replies.clone(), "FINISHED.").unwrap());
        let got: Vec<String> = (0..6).map(|_| gw.complete("s", &opening()).unwrap()).collect();
        assert_eq!(&got[..5], &replies[..]);
        assert_eq!(got[5], "FINISHED.");
    }

    #[test]
    fn sessions_have_independent_cursors() {
        let gw = MockGateway::new(MockScript::from_replies(vec!["r1".into(), "r2".into()], "FINISHED.").unwrap());
        assert_eq!(gw.complete("a", &opening()).unwrap(), "r1");
        assert_eq!(gw.complete("b", &opening()).unwrap(), "r1");
        assert_eq!(gw.complete("a", &opening()).unwrap(), "r2");
    }

    #[test]
    fn override_fires_regardless_of_position() {
        let gw = MockGateway::new(script(serde_json::json!({
            "replies": ["r1", "r2"],
            "overrides": [{"contains": "A", "reply": "Yes, A is right."}],
            "terminal": "FINISHED."
        })));
        let mut h = opening();
        assert_eq!(gw.complete("s", &h).unwrap(), "r1");
        h.push(ChatMessage::tutor("r1"));
        h.push(ChatMessage::student("A"));
        assert_eq!(gw.complete("s", &h).unwrap(), "Yes, A is right.");
        h.push(ChatMessage::tutor("Yes, A is right."));
        h.push(ChatMessage::student("ok"));
        assert_eq!(gw.complete("s", &h).unwrap(), "r2");
        h.push(ChatMessage::student("A again"));
        assert_eq!(gw.complete("s", &h).unwrap(), "Yes, A is right.");
    }

    #[test]
    fn regex_override() {
        let gw = MockGateway::new(script(serde_json::json!({
            "replies": ["r1"],
            "overrides": [{"matches": "(?i)^\\s*b\\b", "reply": "B it is."}],
            "terminal": "FINISHED."
        })));
        let h = vec![
            ChatMessage::system("s"),
            ChatMessage::tutor("r1"),
            ChatMessage::student("b."),
        ];
        assert_eq!(gw.complete("s", &h).unwrap(), "B it is.");
    }

    #[test]
    fn fresh_gateway_resumes_from_history() {
        let doc = serde_json::json!({
            "replies": ["r1", "r2", "r3"],
            "overrides": [{"contains": "A", "reply": "ok"}],
            "terminal": "FINISHED."
        });
        let h = vec![
            ChatMessage::system("s"),
            ChatMessage::tutor("r1"),
            ChatMessage::student("A"),
            ChatMessage::tutor("ok"),
            ChatMessage::student("next"),
            ChatMessage::tutor("r2"),
            ChatMessage::student("more"),
        ];
        let gw = MockGateway::new(script(doc));
        assert_eq!(gw.complete("s", &h).unwrap(), "r3");
    }

    #[test]
    fn summary_requests_get_the_summary_reply() {
        let gw = MockGateway::new(script(serde_json::json!({
            "replies": ["r1"], "terminal": "FINISHED.", "summary": "*Specific topics: x"
        })));
        let h = vec![
            ChatMessage::system("s"),
            ChatMessage::tutor("FINISHED."),
            ChatMessage::system("summarize"),
        ];
        assert_eq!(gw.complete("s", &h).unwrap(), "*Specific topics: x");
        // Does not consume a sequential reply.
        assert_eq!(gw.complete("t", &opening()).unwrap(), "r1");
    }

    #[test]
    fn script_validation() {
        for bad in [
            serde_json::json!({"replies": [], "terminal": "FINISHED."}),
            serde_json::json!({"replies": ["r"]}),
            serde_json::json!({"replies": ["r"], "terminal": "bye"}),
            serde_json::json!({"replies": ["r"], "terminal": "FINISHED.", "overrides": [{"reply": "x"}]}),
            serde_json::json!({"replies": ["r"], "terminal": "FINISHED.", "overrides": [{"matches": "(", "reply": "x"}]}),
        ] {
            assert!(
                matches!(MockScript::load(&bad.to_string()), Err(GatewayError::Script(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn history_must_start_with_system() {
        let gw = MockGateway::new(MockScript::from_replies(vec!["r".into()], "FINISHED.").unwrap());
        assert!(matches!(gw.complete("s", &[]), Err(GatewayError::InvalidRequest(_))));
        assert!(matches!(
            gw.complete("s", &[ChatMessage::student("hi")]),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn live_config_requires_endpoint() {
        let cfg = GatewayConfig {
            provider: Provider::Live,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(GatewayError::Config(_))));
        assert!(GatewayConfig::default().validate().is_ok());
        assert_eq!(GatewayConfig::default().temperature, 0.3);
    }
}
