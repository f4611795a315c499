//! Single-turn chat-completion requests with retry and a per-endpoint rate limit.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::LlmError;

/// Everything needed to reach one model. Adapters are data: URL, auth header
/// and the JSON pointer to the completion text are configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointSpec {
    /// Label used in output files, e.g. "GPT-5".
    pub name: String,
    pub provider: String,
    pub model: String,
    pub base_url: String,
    /// Environment variable holding the token; the token itself is never stored.
    pub auth_env: String,
    pub auth_header: String,
    pub auth_prefix: String,
    pub response_text_pointer: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub min_interval_ms: u64,
    pub temperature: f64,
    /// Merged into the request body (provider-specific knobs).
    pub extra_body: Option<Value>,
}

impl Default for LlmEndpointSpec {
    fn default() -> Self {
        LlmEndpointSpec {
            name: String::new(),
            provider: "openai-compatible".into(),
            model: String::new(),
            base_url: "https://api.openai.com/v1/chat/completions".into(),
            auth_env: "OPENAI_API_KEY".into(),
            auth_header: "Authorization".into(),
            auth_prefix: "Bearer ".into(),
            response_text_pointer: "/choices/0/message/content".into(),
            timeout_secs: 120,
            max_retries: 5,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
            min_interval_ms: 0,
            temperature: 0.0,
            extra_body: None,
        }
    }
}

impl LlmEndpointSpec {
    pub fn label(&self) -> &str {
        if self.name.is_empty() {
            &self.model
        } else {
            &self.name
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        if let (Some(Value::Object(extra)), Value::Object(map)) = (&self.extra_body, &mut body) {
            for (k, v) in extra {
                map.insert(k.clone(), v.clone());
            }
        }
        body
    }

    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.backoff_base_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.backoff_max_ms))
    }
}

/// Endpoints file: `[[endpoint]]` tables.
#[derive(Debug, Clone, Deserialize)]
pub struct EndpointsFile {
    pub endpoint: Vec<LlmEndpointSpec>,
}

pub fn load_endpoints(text: &str) -> Result<Vec<LlmEndpointSpec>, LlmError> {
    let f: EndpointsFile = toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))?;
    Ok(f.endpoint)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    /// `Err` only for transport failures (connect, timeout); HTTP statuses
    /// come back as replies.
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value, timeout: Duration)
        -> Result<HttpReply, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &str, headers: &[(String, String)], body: &Value, timeout: Duration)
        -> Result<HttpReply, String> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        for (k, v) in headers {
            req = req.header(k, v);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

/// Enforces a minimum spacing between request starts.
#[derive(Debug, Default)]
pub struct RateLimiter {
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn wait(&self, min_interval: Duration) {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < min_interval {
                std::thread::sleep(min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub text: String,
    pub attempts: u32,
    pub retries: u32,
    pub status: u16,
}

pub struct LlmClient<T: Transport> {
    pub spec: LlmEndpointSpec,
    transport: T,
    limiter: RateLimiter,
    sleep: fn(Duration),
}

fn retryable(status: u16) -> bool {
    status == 429 || status == 408 || (500..600).contains(&status)
}

impl<T: Transport> LlmClient<T> {
    pub fn new(spec: LlmEndpointSpec, transport: T) -> Self {
        LlmClient {
            spec,
            transport,
            limiter: RateLimiter::default(),
            sleep: std::thread::sleep,
        }
    }

    /// Replaces the backoff sleep (tests).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    fn headers(&self) -> Result<Vec<(String, String)>, LlmError> {
        let mut h = vec![("Content-Type".to_string(), "application/json".to_string())];
        if !self.spec.auth_env.is_empty() {
            let token = std::env::var(&self.spec.auth_env)
                .map_err(|_| LlmError::Config(format!("environment variable {} is not set", self.spec.auth_env)))?;
            h.push((self.spec.auth_header.clone(), format!("{}{}", self.spec.auth_prefix, token)));
        }
        Ok(h)
    }

    fn extract(&self, body: &str) -> Result<String, LlmError> {
        let v: Value = serde_json::from_str(body)
            .map_err(|e| LlmError::Endpoint(format!("{}: response is not JSON: {e}", self.spec.label())))?;
        let text = v
            .pointer(&self.spec.response_text_pointer)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                LlmError::Endpoint(format!(
                    "{}: no string at {}",
                    self.spec.label(),
                    self.spec.response_text_pointer
                ))
            })?;
        if text.trim().is_empty() {
            return Err(LlmError::EmptyResponse(self.spec.label().to_string()));
        }
        Ok(text.to_string())
    }

    /// One independent single-turn request; no conversation state is kept.
    pub fn query(&self, prompt: &str) -> Result<QueryOutcome, LlmError> {
        let headers = self.headers()?;
        let body = self.spec.request_body(prompt);
        let timeout = Duration::from_secs(self.spec.timeout_secs);
        let mut attempt = 0u32;
        loop {
            self.limiter.wait(Duration::from_millis(self.spec.min_interval_ms));
            let failure = match self.transport.post_json(&self.spec.base_url, &headers, &body, timeout) {
                Ok(r) if (200..300).contains(&r.status) => {
                    let text = self.extract(&r.body)?;
                    if attempt > 0 {
                        log::info!("{}: succeeded after {attempt} retries", self.spec.label());
                    }
                    return Ok(QueryOutcome {
                        text,
                        attempts: attempt + 1,
                        retries: attempt,
                        status: r.status,
                    });
                }
                Ok(r) if retryable(r.status) => format!("HTTP {}", r.status),
                Ok(r) => {
                    return Err(LlmError::Endpoint(format!(
                        "{}: HTTP {} {}",
                        self.spec.label(),
                        r.status,
                        r.body.chars().take(200).collect::<String>()
                    )))
                }
                Err(e) => e,
            };
            if attempt >= self.spec.max_retries {
                return Err(LlmError::Endpoint(format!(
                    "{}: giving up after {} attempts: {failure}",
                    self.spec.label(),
                    attempt + 1
                )));
            }
            let wait = self.spec.backoff(attempt);
            log::warn!("{}: {failure}; retry {} in {:?}", self.spec.label(), attempt + 1, wait);
            (self.sleep)(wait);
            attempt += 1;
        }
    }
}
