//! Pluggable chat-completion backends: an OpenAI-compatible HTTP client, a
//! deterministic scripted replay backend for tests, and a recording proxy
//! that captures live responses into a replayable script.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the API key for the HTTP backend. Credentials
/// are never read from config files.
pub const API_KEY_ENV: &str = "MDT_API_KEY";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("replay script exhausted for agent {0}")]
    ScriptExhausted(String),
    #[error("replay mismatch for agent {agent_id}: expected prompt containing {expected:?}")]
    ScriptMismatch { agent_id: String, expected: String },
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad script line {line}: {message}")]
    BadScriptLine { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
    Record,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub seed: i64,
    pub timeout_secs: u64,
    /// At most one retry after a transport failure; no backoff policy.
    pub retry_once: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Replay,
            endpoint_url: None,
            model_name: "default".to_string(),
            temperature: 0.0,
            seed: 42,
            timeout_secs: 120,
            retry_once: false,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        let needs_endpoint = matches!(self.kind, BackendKind::Http | BackendKind::Record);
        if needs_endpoint && self.endpoint_url.is_none() {
            return Err(BackendError::InvalidRequest(
                "endpoint_url required for http/record backends".into(),
            ));
        }
        if !needs_endpoint && self.endpoint_url.is_some() {
            return Err(BackendError::InvalidRequest(
                "endpoint_url only applies to http/record backends".into(),
            ));
        }
        Ok(())
    }
}

/// One scripted exchange. `match_key` is advisory: when non-empty the
/// rendered prompt must contain it, which keeps hand-written fixtures honest
/// without forcing byte-exact prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub agent_id: String,
    #[serde(default)]
    pub match_key: String,
    pub response: String,
}

/// An ordered replay script; entries are consumed sequentially per agent id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayScript {
    entries: Vec<ScriptEntry>,
}

impl ReplayScript {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path).map_err(|e| BackendError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(&line).map_err(|e| BackendError::BadScriptLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), BackendError> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| BackendError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// A chat backend; instances must tolerate concurrent `complete` calls from
/// different consultations.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, agent_id: &str, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

fn validate_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    let Some(first) = messages.first() else {
        return Err(BackendError::InvalidRequest("messages are empty".into()));
    };
    if first.role != Role::System {
        return Err(BackendError::InvalidRequest(
            "first message must have role=system".into(),
        ));
    }
    for m in messages {
        if matches!(m.role, Role::System | Role::User) && m.content.is_empty() {
            return Err(BackendError::InvalidRequest(
                "system/user content must be non-empty".into(),
            ));
        }
    }
    Ok(())
}

/// Deterministic scripted backend. Cursors are per agent and internally
/// synchronized, so concurrent consultations sharing one instance still see
/// each agent's entries in order.
pub struct ReplayBackend {
    entries: Vec<ScriptEntry>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(script: ReplayScript) -> Self {
        Self {
            entries: script.entries,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(ReplayScript::load(path)?))
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, agent_id: &str, messages: &[ChatMessage]) -> Result<String, BackendError> {
        validate_messages(messages)?;
        let mut cursors = self.cursors.lock().expect("replay cursor lock");
        let seen = cursors.entry(agent_id.to_string()).or_insert(0);
        // nth entry for this agent, in script order
        let mut matched = 0usize;
        for entry in &self.entries {
            if entry.agent_id != agent_id {
                continue;
            }
            if matched == *seen {
                if !entry.match_key.is_empty() {
                    let prompt: String = messages
                        .iter()
                        .map(|m| m.content.as_str())
                        .collect::<Vec<_>>()
                        .join("\n");
                    if !prompt.contains(&entry.match_key) {
                        return Err(BackendError::ScriptMismatch {
                            agent_id: agent_id.to_string(),
                            expected: entry.match_key.clone(),
                        });
                    }
                }
                *seen += 1;
                return Ok(entry.response.clone());
            }
            matched += 1;
        }
        Err(BackendError::ScriptExhausted(agent_id.to_string()))
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    seed: i64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: CompletionMessage,
}

#[derive(Deserialize)]
struct CompletionMessage {
    content: String,
}

/// OpenAI-compatible chat-completions client over
/// `<endpoint_url>/v1/chat/completions`. Reads its bearer token from
/// `MDT_API_KEY` when set.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    temperature: f64,
    seed: i64,
    timeout: Duration,
    retry_once: bool,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let endpoint = config
            .endpoint_url
            .clone()
            .ok_or_else(|| BackendError::InvalidRequest("endpoint_url missing".into()))?;
        let timeout = Duration::from_secs(config.timeout_secs);
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::TransportError(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: config.model_name.clone(),
            temperature: config.temperature,
            seed: config.seed,
            timeout,
            retry_once: config.retry_once,
            client,
        })
    }

    /// The JSON body a message list produces; exposed so the wire format can
    /// be asserted without a server.
    pub fn request_body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        serde_json::to_value(CompletionRequest {
            model: &self.model,
            messages,
            temperature: self.temperature,
            seed: self.seed,
        })
        .expect("request serializes")
    }

    fn send_once(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let url = format!("{}/v1/chat/completions", self.endpoint);
        let mut request = self.client.post(&url).json(&self.request_body(messages));
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                request = request.header("authorization", format!("Bearer {key}"));
            }
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout)
            } else {
                BackendError::TransportError(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::TransportError(format!(
                "HTTP {status}: {body}"
            )));
        }
        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| BackendError::TransportError(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::TransportError("response had no choices".into()))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, _agent_id: &str, messages: &[ChatMessage]) -> Result<String, BackendError> {
        validate_messages(messages)?;
        match self.send_once(messages) {
            Ok(text) => Ok(text),
            Err(e) if self.retry_once => {
                log::warn!("retrying after backend error: {e}");
                self.send_once(messages)
            }
            Err(e) => Err(e),
        }
    }
}

/// Proxies an inner backend and appends every exchange to a script file, so
/// a recorded run can be replayed bit-for-bit later.
pub struct RecordBackend {
    inner: Box<dyn ChatBackend>,
    path: PathBuf,
    sink: Mutex<std::fs::File>,
}

impl RecordBackend {
    pub fn new(inner: Box<dyn ChatBackend>, path: &Path) -> Result<Self, BackendError> {
        let sink = std::fs::File::create(path).map_err(|e| BackendError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            sink: Mutex::new(sink),
        })
    }
}

impl ChatBackend for RecordBackend {
    fn complete(&self, agent_id: &str, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let response = self.inner.complete(agent_id, messages)?;
        let entry = ScriptEntry {
            agent_id: agent_id.to_string(),
            match_key: String::new(),
            response: response.clone(),
        };
        let line = serde_json::to_string(&entry).expect("entry serializes");
        let mut sink = self.sink.lock().expect("record sink lock");
        writeln!(sink, "{line}").map_err(|e| BackendError::Io {
            path: self.path.display().to_string(),
            source: e,
        })?;
        sink.flush().map_err(|e| BackendError::Io {
            path: self.path.display().to_string(),
            source: e,
        })?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;
    use std::net::TcpListener;

    fn msgs(user: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::system("system prompt"), ChatMessage::user(user)]
    }

    fn entry(agent: &str, response: &str) -> ScriptEntry {
        ScriptEntry {
            agent_id: agent.into(),
            match_key: String::new(),
            response: response.into(),
        }
    }

    #[test]
    fn replay_returns_entries_in_order_per_agent() {
        let backend = ReplayBackend::new(ReplayScript::new(vec![
            entry("attending", "MDT: Cardiology, Neurology"),
            entry("cardiology", "opinion A"),
            entry("attending", "summary"),
        ]));
        assert_eq!(
            backend.complete("attending", &msgs("profile")).unwrap(),
            "MDT: Cardiology, Neurology"
        );
        assert_eq!(backend.complete("cardiology", &msgs("x")).unwrap(), "opinion A");
        assert_eq!(backend.complete("attending", &msgs("y")).unwrap(), "summary");
        assert!(matches!(
            backend.complete("attending", &msgs("z")),
            Err(BackendError::ScriptExhausted(_))
        ));
    }

    #[test]
    fn replay_is_deterministic_across_instances() {
        let script = ReplayScript::new(vec![entry("a", "one"), entry("a", "two")]);
        let run = |script: ReplayScript| {
            let b = ReplayBackend::new(script);
            vec![
                b.complete("a", &msgs("1")).unwrap(),
                b.complete("a", &msgs("2")).unwrap(),
            ]
        };
        assert_eq!(run(script.clone()), run(script));
    }

    #[test]
    fn replay_match_key_is_asserted_when_present() {
        let backend = ReplayBackend::new(ReplayScript::new(vec![ScriptEntry {
            agent_id: "a".into(),
            match_key: "Syncope".into(),
            response: "ok".into(),
        }]));
        let err = backend.complete("a", &msgs("no such symptom")).unwrap_err();
        assert!(matches!(err, BackendError::ScriptMismatch { .. }));

        let backend = ReplayBackend::new(ReplayScript::new(vec![ScriptEntry {
            agent_id: "a".into(),
            match_key: "Syncope".into(),
            response: "ok".into(),
        }]));
        assert_eq!(backend.complete("a", &msgs("patient has Syncope")).unwrap(), "ok");
    }

    #[test]
    fn complete_requires_leading_system_message() {
        let backend = ReplayBackend::new(ReplayScript::new(vec![entry("a", "x")]));
        let err = backend
            .complete("a", &[ChatMessage::user("hi")])
            .unwrap_err();
        assert!(matches!(err, BackendError::InvalidRequest(_)));
        assert!(matches!(
            backend.complete("a", &[]),
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn script_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.jsonl");
        let script = ReplayScript::new(vec![entry("a", "multi\nline"), entry("b", "x")]);
        script.save(&path).unwrap();
        let loaded = ReplayScript::load(&path).unwrap();
        assert_eq!(loaded, script);
    }

    #[test]
    fn http_request_body_carries_temperature_and_seed() {
        let config = BackendConfig {
            kind: BackendKind::Http,
            endpoint_url: Some("http://localhost:9".into()),
            ..BackendConfig::default()
        };
        let backend = HttpBackend::new(&config).unwrap();
        let body = backend.request_body(&msgs("hello"));
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["seed"], 42);
        assert_eq!(body["model"], "default");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "hello");
    }

    /// Minimal one-shot chat-completions server for wire-format tests.
    fn spawn_stub_server(reply_content: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reply = reply_content.to_string();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let body_start;
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = find_header_end(&buf) {
                    body_start = pos;
                    break;
                }
            }
            let headers = String::from_utf8_lossy(&buf[..body_start]).to_string();
            let content_length: usize = headers
                .lines()
                .find_map(|l| {
                    let l = l.to_ascii_lowercase();
                    l.strip_prefix("content-length:")
                        .map(|v| v.trim().parse().unwrap())
                })
                .unwrap_or(0);
            while buf.len() < body_start + content_length {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
            }
            let body = String::from_utf8_lossy(&buf[body_start..]).to_string();
            let response_body = serde_json::json!({
                "choices": [{ "message": { "role": "assistant", "content": reply } }]
            })
            .to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                response_body.len(),
                response_body
            );
            stream.write_all(response.as_bytes()).unwrap();
            body
        });
        (format!("http://{addr}"), handle)
    }

    fn find_header_end(buf: &[u8]) -> Option<usize> {
        buf.windows(4)
            .position(|w| w == b"\r\n\r\n")
            .map(|p| p + 4)
    }

    #[test]
    fn http_backend_posts_wire_format_and_parses_choice() {
        let (endpoint, handle) = spawn_stub_server("assistant says hi");
        let config = BackendConfig {
            kind: BackendKind::Http,
            endpoint_url: Some(endpoint),
            ..BackendConfig::default()
        };
        let backend = HttpBackend::new(&config).unwrap();
        let reply = backend.complete("attending", &msgs("hello")).unwrap();
        assert_eq!(reply, "assistant says hi");
        let sent_body = handle.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&sent_body).unwrap();
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["seed"], 42);
        assert_eq!(sent["messages"][0]["role"], "system");
    }

    #[test]
    fn record_backend_captures_replayable_script() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recorded.jsonl");
        let inner = ReplayBackend::new(ReplayScript::new(vec![
            entry("attending", "one"),
            entry("attending", "two"),
        ]));
        let recorder = RecordBackend::new(Box::new(inner), &path).unwrap();
        assert_eq!(recorder.complete("attending", &msgs("a")).unwrap(), "one");
        assert_eq!(recorder.complete("attending", &msgs("b")).unwrap(), "two");
        drop(recorder);

        let replay = ReplayBackend::from_file(&path).unwrap();
        assert_eq!(replay.complete("attending", &msgs("a")).unwrap(), "one");
        assert_eq!(replay.complete("attending", &msgs("b")).unwrap(), "two");
    }
}
