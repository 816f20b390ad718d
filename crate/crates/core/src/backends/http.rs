use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::embed::normalize;
use super::{render_chatml, BackendError, BackendKind, ChatBackend, Embedder, GenerationRequest};

/// Environment variable holding the provider API key.
pub const API_KEY_ENV: &str = "APLBRIDGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WireFormat {
    /// OpenAI-style `messages`; the server applies its chat template.
    #[default]
    ChatMessages,
    /// A completion `prompt` rendered here in ChatML.
    ChatmlPrompt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let backoff = Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(16)));
        hint.map_or(backoff, |h| h.max(backoff)).min(Duration::from_secs(60))
    }

    /// Runs `op`, retrying retryable errors with exponential backoff.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let hint = match &e {
                        BackendError::RateLimited { retry_after } => *retry_after,
                        _ => None,
                    };
                    let wait = self.delay(attempt, hint);
                    log::warn!("{e}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    /// Full URL of the completions or embeddings route.
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub wire: WireFormat,
}

impl HttpSettings {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            wire: WireFormat::default(),
        }
    }
}

fn key_from_env() -> Result<String, BackendError> {
    std::env::var(API_KEY_ENV)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| BackendError::Config(format!("{API_KEY_ENV} is not set")))
}

struct Client {
    agent: ureq::Agent,
    settings: HttpSettings,
    api_key: Option<String>,
}

impl Client {
    fn new(settings: HttpSettings, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            settings,
            api_key,
        }
    }

    fn post_once(&self, body: &Json) -> Result<Json, BackendError> {
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string())),
            429 => Err(BackendError::RateLimited { retry_after }),
            400 | 413 if text.contains("context") => Err(BackendError::ContextOverflow(text)),
            500..=599 => Err(BackendError::Transport(format!("status {status}: {text}"))),
            _ => Err(BackendError::Rejected { status, body: text }),
        }
    }

    fn post(&self, body: &Json) -> Result<Json, BackendError> {
        self.settings.retry.run(|| self.post_once(body))
    }
}

/// An OpenAI-compatible chat or completion endpoint.
pub struct HttpChat {
    client: Client,
}

impl HttpChat {
    pub fn new(settings: HttpSettings, api_key: Option<String>) -> Self {
        Self {
            client: Client::new(settings, api_key),
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(settings: HttpSettings) -> Result<Self, BackendError> {
        Ok(Self::new(settings, Some(key_from_env()?)))
    }

    fn body(&self, request: &GenerationRequest) -> Json {
        let model = if request.model.is_empty() {
            &self.client.settings.model
        } else {
            &request.model
        };
        let mut body = json!({
            "model": model,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        match self.client.settings.wire {
            WireFormat::ChatMessages => body["messages"] = serde_json::to_value(&request.messages).expect("messages serialize"),
            WireFormat::ChatmlPrompt => body["prompt"] = Json::String(render_chatml(&request.messages)),
        }
        body
    }
}

impl ChatBackend for HttpChat {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.validate()?;
        let resp = self.client.post(&self.body(request))?;
        let choice = &resp["choices"][0];
        let text = match self.client.settings.wire {
            WireFormat::ChatMessages => &choice["message"]["content"],
            WireFormat::ChatmlPrompt => &choice["text"],
        };
        text.as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed("no completion text in response".into()))
    }

    fn kind(&self) -> BackendKind {
        BackendKind::HttpChatEndpoint
    }
}

/// An OpenAI-compatible embeddings endpoint. Vectors are re-normalized.
pub struct HttpEmbedder {
    client: Client,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings, api_key: Option<String>, dimension: usize) -> Self {
        Self {
            client: Client::new(settings, api_key),
            dimension,
        }
    }

    pub fn from_env(settings: HttpSettings, dimension: usize) -> Result<Self, BackendError> {
        Ok(Self::new(settings, Some(key_from_env()?), dimension))
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.is_empty() {
            return Err(BackendError::Precondition("cannot embed empty text".into()));
        }
        let body = json!({"model": self.client.settings.model, "input": text});
        let resp = self.client.post(&body)?;
        let mut v: Vec<f64> = resp["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| BackendError::Malformed("no embedding in response".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| BackendError::Malformed("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if v.len() != self.dimension {
            return Err(BackendError::Malformed(format!(
                "expected dimension {}, got {}",
                self.dimension,
                v.len()
            )));
        }
        normalize(&mut v);
        Ok(v)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}
