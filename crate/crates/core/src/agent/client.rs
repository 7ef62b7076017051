//! Black-box language-model clients: messages in, text out.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Opaque sampling parameters forwarded verbatim to the endpoint.
pub type Sampling = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("no scripted response matches the prompt")]
    NoScriptMatch,
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<ClientError>,
    },
    #[error("cannot load client fixture {path}: {reason}")]
    Fixture { path: String, reason: String },
}

impl ClientError {
    fn retryable(&self) -> bool {
        match self {
            Self::Timeout | Self::Transport(_) => true,
            Self::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A language model seen only through its text interface. Implementations
/// must tolerate concurrent calls.
pub trait LmClient: Send + Sync {
    fn model_name(&self) -> &str;

    fn generate(&self, messages: &[Message], sampling: &Sampling) -> Result<String, ClientError>;

    /// A client for an independent run. Scripted clients restart their
    /// response sequences; network clients share connection and rate limit
    /// state.
    fn fresh(&self) -> Arc<dyn LmClient>;
}

/// One scripted response: either text or a simulated failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Error { error: String },
}

/// Matches when every `all` substring, at least one `any` substring (if
/// given), no `none` substring, and the optional `regex` hit the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub all: Vec<String>,
    #[serde(default)]
    pub any: Vec<String>,
    #[serde(default)]
    pub none: Vec<String>,
    #[serde(default)]
    pub regex: Option<String>,
    /// Replies handed out in order; the last one repeats.
    pub responses: Vec<ScriptedReply>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptFixture {
    #[serde(default = "default_scripted_name")]
    pub model: String,
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: Option<String>,
}

fn default_scripted_name() -> String {
    "scripted".into()
}

/// Deterministic client driven by a fixture of prompt patterns. The prompt
/// seen by the rules is every message text joined by newlines; the first
/// matching rule answers.
#[derive(Debug)]
pub struct ScriptedClient {
    fixture: ScriptFixture,
    compiled: Vec<Option<Regex>>,
    counters: Mutex<Vec<usize>>,
}

impl ScriptedClient {
    pub fn new(fixture: ScriptFixture) -> Result<Self, ClientError> {
        let compiled =
            fixture
                .rules
                .iter()
                .map(|r| {
                    r.regex.as_deref().map(Regex::new).transpose().map_err(|e| {
                        ClientError::Fixture {
                            path: format!("rule {:?}", r.name),
                            reason: e.to_string(),
                        }
                    })
                })
                .collect::<Result<_, _>>()?;
        if let Some(r) = fixture.rules.iter().find(|r| r.responses.is_empty()) {
            return Err(ClientError::Fixture {
                path: format!("rule {:?}", r.name),
                reason: "rule has no responses".into(),
            });
        }
        let counters = Mutex::new(vec![0; fixture.rules.len()]);
        Ok(Self {
            fixture,
            compiled,
            counters,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ClientError> {
        let fail = |reason: String| ClientError::Fixture {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let fixture = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        Self::new(fixture)
    }

    pub fn fixture(&self) -> &ScriptFixture {
        &self.fixture
    }

    fn matches(&self, i: usize, prompt: &str) -> bool {
        let rule = &self.fixture.rules[i];
        rule.all.iter().all(|s| prompt.contains(s.as_str()))
            && (rule.any.is_empty() || rule.any.iter().any(|s| prompt.contains(s.as_str())))
            && !rule.none.iter().any(|s| prompt.contains(s.as_str()))
            && self.compiled[i]
                .as_ref()
                .is_none_or(|re| re.is_match(prompt))
    }
}

impl LmClient for ScriptedClient {
    fn model_name(&self) -> &str {
        &self.fixture.model
    }

    fn generate(&self, messages: &[Message], _sampling: &Sampling) -> Result<String, ClientError> {
        let prompt = messages
            .iter()
            .map(|m| m.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let Some(i) = (0..self.fixture.rules.len()).find(|&i| self.matches(i, &prompt)) else {
            return self
                .fixture
                .default
                .clone()
                .ok_or(ClientError::NoScriptMatch);
        };
        let step = {
            let mut counters = self.counters.lock().expect("counter lock");
            let step = counters[i];
            counters[i] += 1;
            step
        };
        let responses = &self.fixture.rules[i].responses;
        match &responses[step.min(responses.len() - 1)] {
            ScriptedReply::Text(t) => Ok(t.clone()),
            ScriptedReply::Error { error } if error == "timeout" => Err(ClientError::Timeout),
            ScriptedReply::Error { error } => Err(ClientError::Scripted(error.clone())),
        }
    }

    fn fresh(&self) -> Arc<dyn LmClient> {
        Arc::new(Self {
            fixture: self.fixture.clone(),
            compiled: self.compiled.clone(),
            counters: Mutex::new(vec![0; self.fixture.rules.len()]),
        })
    }
}

/// Spaces requests so that at most `per_minute` start in any minute.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        Self {
            interval: Duration::from_secs(60) / per_minute.max(1),
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpClientConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. Unset means no
    /// authorization header.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

/// Client for OpenAI-compatible chat-completion endpoints.
#[derive(Clone)]
pub struct HttpClient {
    config: HttpClientConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: Option<Arc<RateLimiter>>,
    backoff: Duration,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl HttpClient {
    pub fn new(config: HttpClientConfig) -> Result<Self, ClientError> {
        let api_key = match &config.api_key_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| ClientError::MissingApiKey(var.clone()))?)
            }
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limiter = config
            .requests_per_minute
            .map(|n| Arc::new(RateLimiter::per_minute(n)));
        Ok(Self {
            config,
            api_key,
            agent,
            limiter,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay between retries; doubles per attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn request_once(&self, body: &serde_json::Value) -> Result<String, ClientError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let url = format!(
            "{}/chat/completions",
            self.config.endpoint.trim_end_matches('/')
        );
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ClientError::Timeout,
            other => ClientError::Transport(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ClientError::Http {
                status,
                body: body.chars().take(2000).collect(),
            });
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| ClientError::Malformed(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError::Malformed("missing choices[0].message.content".into()))
    }
}

impl LmClient for HttpClient {
    fn model_name(&self) -> &str {
        &self.config.model
    }

    fn generate(&self, messages: &[Message], sampling: &Sampling) -> Result<String, ClientError> {
        let mut body = serde_json::Map::new();
        for (k, v) in sampling {
            body.insert(k.clone(), v.clone());
        }
        body.insert("model".into(), self.config.model.clone().into());
        body.insert(
            "messages".into(),
            messages
                .iter()
                .map(|m| serde_json::json!({"role": m.role, "content": m.text}))
                .collect(),
        );
        let body = serde_json::Value::Object(body);
        let attempts = self.config.retries + 1;
        let mut last = ClientError::Timeout;
        for attempt in 0..attempts {
            match self.request_once(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable() => {
                    log::warn!(
                        "{} attempt {}/{attempts} failed: {e}",
                        self.config.model,
                        attempt + 1
                    );
                    last = e;
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(attempt));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(ClientError::Exhausted {
            attempts,
            last: Box::new(last),
        })
    }

    fn fresh(&self) -> Arc<dyn LmClient> {
        Arc::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn fixture(json: &str) -> ScriptedClient {
        ScriptedClient::new(serde_json::from_str(json).unwrap()).unwrap()
    }

    #[test]
    fn scripted_rules_sequence_and_default() {
        let c = fixture(
            r#"{"model": "m", "rules": [
                {"name": "a", "all": ["alpha"], "responses": ["one", "two"]},
                {"name": "b", "any": ["beta", "gamma"], "none": ["delta"], "responses": [{"error": "timeout"}]}
            ], "default": "fallback"}"#,
        );
        let s = Sampling::new();
        let ask = |t: &str| c.generate(&[Message::user(t)], &s);
        assert_eq!(ask("alpha").unwrap(), "one");
        assert_eq!(ask("alpha").unwrap(), "two");
        assert_eq!(ask("alpha").unwrap(), "two");
        assert_eq!(ask("gamma").unwrap_err(), ClientError::Timeout);
        assert_eq!(ask("gamma delta").unwrap(), "fallback");
        let f = c.fresh();
        assert_eq!(f.generate(&[Message::user("alpha")], &s).unwrap(), "one");
    }

    #[test]
    fn scripted_without_default_fails() {
        let c = fixture(r#"{"rules": [{"regex": "^x\\d+$", "responses": ["hit"]}]}"#);
        let s = Sampling::new();
        assert_eq!(c.generate(&[Message::user("x12")], &s).unwrap(), "hit");
        assert_eq!(
            c.generate(&[Message::user("y")], &s).unwrap_err(),
            ClientError::NoScriptMatch
        );
        assert_eq!(c.model_name(), "scripted");
    }

    /// Serves canned HTTP responses, one per connection, and returns the
    /// request bodies it saw.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (addr, handle)
    }

    #[test]
    fn http_client_retries_and_forwards_sampling() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#.to_string();
        let (addr, server) = serve(vec![(503, "busy".into()), (200, ok)]);
        let client = HttpClient::new(HttpClientConfig {
            endpoint: addr,
            model: "test-model".into(),
            api_key_env: None,
            timeout_secs: 5,
            retries: 1,
            requests_per_minute: None,
        })
        .unwrap()
        .with_backoff(Duration::from_millis(1));
        let mut sampling = Sampling::new();
        sampling.insert("temperature".into(), serde_json::json!(0.2));
        assert_eq!(
            client.generate(&[Message::user("hi")], &sampling).unwrap(),
            "hello"
        );
        let bodies = server.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0.2);
        assert_eq!(sent["messages"][0]["content"], "hi");
    }

    #[test]
    fn http_client_gives_up_after_retries() {
        let (addr, server) = serve(vec![(500, "a".into()), (500, "b".into())]);
        let client = HttpClient::new(HttpClientConfig {
            endpoint: addr,
            model: "m".into(),
            api_key_env: None,
            timeout_secs: 5,
            retries: 1,
            requests_per_minute: None,
        })
        .unwrap()
        .with_backoff(Duration::from_millis(1));
        let err = client
            .generate(&[Message::user("hi")], &Sampling::new())
            .unwrap_err();
        assert!(
            matches!(err, ClientError::Exhausted { attempts: 2, .. }),
            "{err:?}"
        );
        server.join().unwrap();
    }

    #[test]
    fn missing_api_key_is_reported() {
        let err = HttpClient::new(HttpClientConfig {
            endpoint: "http://127.0.0.1:9".into(),
            model: "m".into(),
            api_key_env: Some("CPBENCH_TEST_KEY_THAT_IS_NOT_SET".into()),
            timeout_secs: 1,
            retries: 0,
            requests_per_minute: None,
        })
        .unwrap_err();
        assert_eq!(
            err,
            ClientError::MissingApiKey("CPBENCH_TEST_KEY_THAT_IS_NOT_SET".into())
        );
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let l = RateLimiter::per_minute(1200);
        let start = Instant::now();
        for _ in 0..3 {
            l.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(100));
    }
}
