//! Chat-completion and embedding providers behind small traits, plus
//! deterministic offline stand-ins.

mod embed;
mod http;
mod mock;
mod replay;

use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use embed::{cosine, Embedder, HashedNgramEmbedder, DEFAULT_DIMENSION};
pub use http::{HttpChat, HttpEmbedder, HttpSettings, RetryPolicy, WireFormat, API_KEY_ENV};
pub use mock::{Matcher, Rule, ScriptedMock};
pub use replay::ReplayCache;

/// Default output budget, matching the 2048-token sequence length the
/// published setup used for inference.
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<ChatMessage>,
    pub max_output_tokens: u32,
    pub temperature: f64,
    pub model: String,
}

impl GenerationRequest {
    pub fn new(messages: Vec<ChatMessage>, model: impl Into<String>) -> Self {
        Self {
            messages,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: 0.0,
            model: model.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::Precondition("request has no messages".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::Precondition("max_output_tokens must be positive".into()));
        }
        if self.messages.iter().skip(1).any(|m| m.role == Role::System) {
            return Err(BackendError::Precondition("a system message may only come first".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Field order is fixed by the
    /// struct, so the digest is stable across runs.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("requests always serialize");
        hex::encode(Sha256::digest(&canonical))
    }

    /// All message contents joined by newlines, used for rule matching.
    pub fn text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited{}", .retry_after.map(|d| format!(" (retry after {}s)", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("context overflow: {0}")]
    ContextOverflow(String),
    #[error("no recorded response for request {digest}")]
    CacheMiss { digest: String },
    #[error("provider rejected the request (status {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("no scripted rule matches the request")]
    NoRule,
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl BackendError {
    /// Only transport failures and rate limits are worth retrying.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::RateLimited { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChatEndpoint,
    ScriptedMock,
    ReplayCache,
}

pub trait ChatBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError>;
    fn kind(&self) -> BackendKind;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        (**self).generate(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
}

/// ChatML rendering. A trailing assistant message is left open as the
/// generation prefix.
pub fn render_chatml(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for (i, m) in messages.iter().enumerate() {
        let open = i + 1 == messages.len() && m.role == Role::Assistant;
        out.push_str("<|im_start|>");
        out.push_str(&m.role.to_string());
        out.push('\n');
        out.push_str(&m.content);
        if !open {
            out.push_str("<|im_end|>\n\n");
        }
    }
    out
}

/// Caps the number of in-flight requests to the wrapped backend.
pub struct Limited<B> {
    inner: B,
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<B> Limited<B> {
    pub fn new(inner: B, limit: usize) -> Self {
        Self {
            inner,
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

impl<B: ChatBackend> ChatBackend for Limited<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        {
            let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.limit {
                n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        let result = self.inner.generate(request);
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.freed.notify_one();
        result
    }

    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn req(text: &str) -> GenerationRequest {
        GenerationRequest::new(vec![ChatMessage::system("s"), ChatMessage::user(text)], "m")
    }

    #[test]
    fn validation() {
        assert!(matches!(
            GenerationRequest::new(vec![], "m").validate(),
            Err(BackendError::Precondition(_))
        ));
        let mut r = req("x");
        r.max_output_tokens = 0;
        assert!(r.validate().is_err());
        let late_system = GenerationRequest::new(vec![ChatMessage::user("a"), ChatMessage::system("b")], "m");
        assert!(late_system.validate().is_err());
        assert!(req("x").validate().is_ok());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        assert_eq!(req("a").digest(), req("a").digest());
        assert_ne!(req("a").digest(), req("b").digest());
        assert_eq!(req("a").digest().len(), 64);
        let mut t = req("a");
        t.temperature = 0.5;
        assert_ne!(t.digest(), req("a").digest());
    }

    #[test]
    fn chatml_leaves_assistant_prefix_open() {
        let text = render_chatml(&[
            ChatMessage::system("S"),
            ChatMessage::user("U\n"),
            ChatMessage::assistant("A"),
        ]);
        assert_eq!(
            text,
            "<|im_start|>system\nS<|im_end|>\n\n<|im_start|>user\nU\n<|im_end|>\n\n<|im_start|>assistant\nA"
        );
    }

    struct Slow {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl ChatBackend for Slow {
        fn generate(&self, _: &GenerationRequest) -> Result<String, BackendError> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(String::new())
        }

        fn kind(&self) -> BackendKind {
            BackendKind::ScriptedMock
        }
    }

    #[test]
    fn limiter_bounds_concurrency() {
        let slow = Slow {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        };
        let limited = Arc::new(Limited::new(slow, 2));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let l = limited.clone();
                std::thread::spawn(move || l.generate(&req("x")).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(limited.inner.peak.load(Ordering::SeqCst) <= 2);
    }
}
