//! Chat-completion access shared by the planner, answerer and policy roles.
//!
//! A [`Gateway`] wraps either a remote HTTP backend or a [`ScriptedStub`] that replies
//! from a fixed rule list, so every orchestration path runs without a model.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    System,
    User,
    Assistant,
    ToolObservation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_refs: Vec<String>,
}

impl ChatMessage {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            image_refs: Vec::new(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::new(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::new(Role::Assistant, text)
    }

    pub fn observation(text: impl Into<String>) -> Self {
        Self::new(Role::ToolObservation, text)
    }

    pub fn with_image(mut self, path: impl Into<String>) -> Self {
        self.image_refs.push(path.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Greedy,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeSpec {
    pub mode: DecodeMode,
    /// Ignored for greedy decoding.
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: u32,
}

impl DecodeSpec {
    pub fn greedy() -> Self {
        Self {
            mode: DecodeMode::Greedy,
            temperature: 0.0,
            seed: 0,
            max_tokens: 1024,
        }
    }

    pub fn sample(temperature: f64, seed: u64) -> Self {
        Self {
            mode: DecodeMode::Sample,
            temperature,
            seed,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("no messages to complete")]
    EmptyMessages,
    #[error("message {0} has neither text nor images")]
    EmptyMessage(usize),
    #[error("scripted stub has no rule matching the latest message and no default reply")]
    NoMatch,
    #[error("invalid script rule: {0}")]
    BadRule(String),
    #[error("remote backend failed after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Remote {
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("transcript log: {0}")]
    Trace(#[from] std::io::Error),
    #[error("gateway config {path}: {message}")]
    Config { path: String, message: String },
}

/// Which text a rule's patterns are matched against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchScope {
    /// The trailing run of non-assistant messages (latest user prompt and observation).
    #[default]
    Latest,
    /// Every message in the conversation.
    Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Regexes that must all match.
    pub when: Vec<String>,
    #[serde(default)]
    pub scope: MatchScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    /// Alternatives; greedy decoding takes the first, sampling picks one by seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replies: Vec<String>,
}

impl ScriptRule {
    pub fn new(when: &[&str], reply: impl Into<String>) -> Self {
        Self {
            when: when.iter().map(|s| s.to_string()).collect(),
            scope: MatchScope::Latest,
            reply: Some(reply.into()),
            replies: Vec::new(),
        }
    }

    pub fn in_transcript(mut self) -> Self {
        self.scope = MatchScope::Transcript;
        self
    }
}

#[derive(Debug, Clone)]
struct CompiledRule {
    patterns: Vec<Regex>,
    scope: MatchScope,
    replies: Vec<String>,
}

/// Deterministic stand-in for a model: first matching rule wins.
#[derive(Debug, Clone)]
pub struct ScriptedStub {
    rules: Vec<CompiledRule>,
    default: Option<String>,
}

impl ScriptedStub {
    pub fn new(rules: Vec<ScriptRule>, default: Option<String>) -> Result<Self, GatewayError> {
        let rules = rules
            .into_iter()
            .map(|r| {
                let patterns = r
                    .when
                    .iter()
                    .map(|p| Regex::new(p).map_err(|e| GatewayError::BadRule(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut replies: Vec<String> = r.reply.into_iter().collect();
                replies.extend(r.replies);
                if replies.is_empty() {
                    return Err(GatewayError::BadRule(format!(
                        "rule {:?} has no reply",
                        r.when
                    )));
                }
                Ok(CompiledRule {
                    patterns,
                    scope: r.scope,
                    replies,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rules, default })
    }

    fn reply(&self, messages: &[ChatMessage], decode: &DecodeSpec) -> Result<String, GatewayError> {
        let tail_start = messages
            .iter()
            .rposition(|m| m.role == Role::Assistant)
            .map_or(0, |i| i + 1);
        let latest = join_text(&messages[tail_start..]);
        let transcript = join_text(messages);
        for rule in &self.rules {
            let hay = match rule.scope {
                MatchScope::Latest => &latest,
                MatchScope::Transcript => &transcript,
            };
            if rule.patterns.iter().all(|p| p.is_match(hay)) {
                let idx = match decode.mode {
                    DecodeMode::Greedy => 0,
                    DecodeMode::Sample => {
                        let turn = messages.iter().filter(|m| m.role == Role::Assistant).count() as u64;
                        let mut rng = ChaCha8Rng::seed_from_u64(decode.seed ^ turn.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        rng.random_range(0..rule.replies.len())
                    }
                };
                return Ok(rule.replies[idx].clone());
            }
        }
        self.default.clone().ok_or(GatewayError::NoMatch)
    }
}

fn join_text(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| m.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A single POST endpoint accepting `{messages, decode}` and returning `{text}`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    endpoint: String,
    retries: u32,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, retries: u32, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.into(),
            retries,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    fn complete(&self, messages: &[ChatMessage], decode: &DecodeSpec) -> Result<String, GatewayError> {
        #[derive(Serialize)]
        struct Req<'a> {
            messages: &'a [ChatMessage],
            decode: &'a DecodeSpec,
        }
        #[derive(Deserialize)]
        struct Resp {
            text: String,
        }
        let mut last_status = None;
        let mut last_message = String::new();
        let attempts = self.retries + 1;
        for attempt in 1..=attempts {
            match self.agent.post(&self.endpoint).send_json(Req { messages, decode }) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_json::<Resp>().map(|r| r.text).map_err(|e| {
                            GatewayError::Remote {
                                attempts: attempt,
                                status: Some(status),
                                message: format!("unreadable response: {e}"),
                            }
                        });
                    }
                    last_status = Some(status);
                    last_message = resp.body_mut().read_to_string().unwrap_or_default();
                    if status < 500 && status != 429 {
                        return Err(GatewayError::Remote {
                            attempts: attempt,
                            status: last_status,
                            message: last_message,
                        });
                    }
                }
                Err(e) => {
                    last_status = None;
                    last_message = e.to_string();
                }
            }
            log::warn!("model backend attempt {attempt}/{attempts} failed: {last_message}");
        }
        Err(GatewayError::Remote {
            attempts,
            status: last_status,
            message: last_message,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Backend {
    Stub(ScriptedStub),
    Remote(RemoteBackend),
}

/// One logged call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub messages: Vec<ChatMessage>,
    pub decode: DecodeSpec,
    pub reply: String,
}

#[derive(Debug)]
enum TraceSink {
    File(Mutex<BufWriter<File>>),
    Memory(Mutex<Vec<TranscriptEntry>>),
}

#[derive(Debug)]
pub struct Gateway {
    backend: Backend,
    trace: Option<TraceSink>,
}

impl Gateway {
    pub fn new(backend: Backend) -> Self {
        Self { backend, trace: None }
    }

    pub fn stub(stub: ScriptedStub) -> Self {
        Self::new(Backend::Stub(stub))
    }

    /// Appends every call to a JSONL transcript at `path` (truncating it first).
    pub fn with_trace_file(mut self, path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        self.trace = Some(TraceSink::File(Mutex::new(BufWriter::new(file))));
        Ok(self)
    }

    pub fn with_memory_trace(mut self) -> Self {
        self.trace = Some(TraceSink::Memory(Mutex::new(Vec::new())));
        self
    }

    /// Calls recorded by a memory trace (empty for file or no trace).
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        match &self.trace {
            Some(TraceSink::Memory(m)) => m.lock().expect("transcript lock").clone(),
            _ => Vec::new(),
        }
    }

    pub fn complete(&self, messages: &[ChatMessage], decode: &DecodeSpec) -> Result<String, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::EmptyMessages);
        }
        if let Some(i) = messages.iter().position(|m| m.text.is_empty() && m.image_refs.is_empty()) {
            return Err(GatewayError::EmptyMessage(i));
        }
        let reply = match &self.backend {
            Backend::Stub(s) => s.reply(messages, decode)?,
            Backend::Remote(r) => r.complete(messages, decode)?,
        };
        match &self.trace {
            Some(TraceSink::File(w)) => {
                let entry = TranscriptEntryRef { messages, decode, reply: &reply };
                let line = serde_json::to_string(&entry).expect("serializable");
                let mut w = w.lock().expect("transcript lock");
                w.write_all(line.as_bytes())?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
            Some(TraceSink::Memory(m)) => m.lock().expect("transcript lock").push(TranscriptEntry {
                messages: messages.to_vec(),
                decode: *decode,
                reply: reply.clone(),
            }),
            None => {}
        }
        Ok(reply)
    }

    pub fn from_config(cfg: &GatewayConfig) -> Result<Self, GatewayError> {
        let backend = match cfg.kind {
            BackendKind::Stub => Backend::Stub(ScriptedStub::new(cfg.rules.clone(), cfg.default.clone())?),
            BackendKind::Remote => {
                let endpoint = cfg.endpoint.clone().ok_or_else(|| GatewayError::Config {
                    path: "<config>".into(),
                    message: "remote backend needs `endpoint`".into(),
                })?;
                Backend::Remote(RemoteBackend::new(
                    endpoint,
                    cfg.retries,
                    Duration::from_secs(cfg.timeout_secs),
                ))
            }
        };
        let gw = Gateway::new(backend);
        match &cfg.trace {
            Some(p) => gw.with_trace_file(p),
            None => Ok(gw),
        }
    }
}

#[derive(Serialize)]
struct TranscriptEntryRef<'a> {
    messages: &'a [ChatMessage],
    decode: &'a DecodeSpec,
    reply: &'a str,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Stub,
    Remote,
}

/// Gateway settings as read from TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    pub trace: Option<PathBuf>,
    pub default: Option<String>,
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
}

fn default_retries() -> u32 {
    2
}

fn default_timeout() -> u64 {
    60
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let err = |message: String| GatewayError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut cfg: GatewayConfig = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        if let (Some(t), Some(base)) = (&cfg.trace, path.parent()) {
            if t.is_relative() {
                cfg.trace = Some(base.join(t));
            }
        }
        Ok(cfg)
    }
}
