//! Run configuration (TOML). Unknown keys are rejected, which also keeps
//! secrets out: the API key is read only from the environment.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    BackendError, ChatBackend, Embedder, HashedNgramEmbedder, HttpChat, HttpEmbedder, HttpSettings, Limited,
    ReplayCache, RetryPolicy, ScriptedMock, WireFormat, API_KEY_ENV, DEFAULT_DIMENSION, DEFAULT_MAX_OUTPUT_TOKENS,
};
use crate::retrieval::{DEFAULT_CHUNK_OVERLAP, DEFAULT_CHUNK_SIZE, DEFAULT_TOP_K};
use crate::runner::{CommandExecutor, Executor, Limits, SetupError, StubExecutor, Tolerance};
use crate::strategies::{Strategy, DEFAULT_FEEDBACK_BUDGET, DEFAULT_MAX_ITERATIONS, DEFAULT_SUMMARY_BUDGET};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub wire: WireFormat,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Upper bound on requests in flight; 0 means unbounded.
    #[serde(default)]
    pub max_concurrency: usize,
    /// Refuse to start without the API key in the environment. Turn off
    /// for local servers that need no key.
    #[serde(default = "yes")]
    pub require_api_key: bool,
}

fn default_timeout_secs() -> u64 {
    120
}

fn yes() -> bool {
    true
}

impl HttpConfig {
    fn settings(&self) -> HttpSettings {
        let mut s = HttpSettings::new(self.endpoint.clone(), self.model.clone());
        s.timeout = Duration::from_secs(self.timeout_secs);
        s.retry = self.retry;
        s.wire = self.wire;
        s
    }

    fn api_key(&self) -> Result<Option<String>, ConfigError> {
        match std::env::var(API_KEY_ENV) {
            Ok(k) if !k.is_empty() => Ok(Some(k)),
            _ if self.require_api_key => Err(ConfigError::Invalid(format!(
                "{API_KEY_ENV} is not set (set require_api_key = false for keyless endpoints)"
            ))),
            _ => Ok(None),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(ConfigError::Invalid(format!("endpoint `{}` is not an http(s) URL", self.endpoint)));
        }
        if self.model.trim().is_empty() {
            return Err(ConfigError::Invalid("http model name is empty".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ConfigError::Invalid("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Scripted responses from a rule file and/or a golden directory.
    Mock {
        #[serde(default)]
        rules: Option<PathBuf>,
        #[serde(default)]
        golden: Option<PathBuf>,
    },
    /// Recorded responses; with `upstream`, misses are fetched and recorded.
    Replay {
        dir: PathBuf,
        #[serde(default)]
        upstream: Option<HttpConfig>,
    },
    Http(HttpConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Mock {
            rules: None,
            golden: None,
        }
    }
}

impl BackendConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            BackendConfig::Mock { rules: None, golden: None } => {
                Err(ConfigError::Invalid("mock backend needs `rules` or `golden`".into()))
            }
            BackendConfig::Mock { .. } => Ok(()),
            BackendConfig::Replay { upstream, .. } => upstream.as_ref().map_or(Ok(()), HttpConfig::validate),
            BackendConfig::Http(h) => h.validate(),
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            BackendConfig::Mock { rules, golden } => {
                for p in [rules, golden].into_iter().flatten() {
                    *p = base.join(&*p);
                }
            }
            BackendConfig::Replay { dir, .. } => *dir = base.join(&*dir),
            BackendConfig::Http(_) => {}
        }
    }

    pub fn build(&self) -> Result<Box<dyn ChatBackend>, ConfigError> {
        self.validate()?;
        Ok(match self {
            BackendConfig::Mock { rules, golden } => {
                let mut mock = ScriptedMock::default();
                if let Some(r) = rules {
                    mock.rules.extend(ScriptedMock::from_file(r)?.rules);
                }
                if let Some(g) = golden {
                    mock.rules.extend(ScriptedMock::from_golden(g)?.rules);
                }
                Box::new(mock)
            }
            BackendConfig::Replay { dir, upstream } => match upstream {
                None => Box::new(ReplayCache::replay(dir.clone())),
                Some(h) => Box::new(ReplayCache::recording(dir.clone(), http_chat(h)?)),
            },
            BackendConfig::Http(h) => http_chat(h)?,
        })
    }
}

fn http_chat(h: &HttpConfig) -> Result<Box<dyn ChatBackend>, ConfigError> {
    let chat = HttpChat::new(h.settings(), h.api_key()?);
    Ok(if h.max_concurrency > 0 {
        Box::new(Limited::new(chat, h.max_concurrency))
    } else {
        Box::new(chat)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    /// Sent with every request; part of the replay digest.
    pub model: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model: "mock".into(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub kind: Strategy,
    pub iterative: bool,
    pub max_iterations: usize,
    /// Add rendered C# signatures from the APL type headers.
    pub signatures: bool,
    /// Reuse `nl_description` from the corpus instead of generating one.
    pub reuse_descriptions: bool,
    pub feedback_budget: usize,
    /// Keep full prompts in the results file.
    pub record_prompts: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: Strategy::Direct,
            iterative: false,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            signatures: true,
            reuse_descriptions: true,
            feedback_budget: DEFAULT_FEEDBACK_BUDGET,
            record_prompts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Hashed {
        #[serde(default = "default_dimension")]
        dimension: usize,
        #[serde(default = "default_ngram")]
        n: usize,
    },
    /// Endpoint settings go in a nested `http` table.
    Http {
        http: HttpConfig,
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

fn default_ngram() -> usize {
    3
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashed {
            dimension: DEFAULT_DIMENSION,
            n: 3,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        match self {
            EmbedderConfig::Hashed { dimension, n } => {
                if *dimension == 0 || *n == 0 {
                    return Err(ConfigError::Invalid("embedder dimension and n must be positive".into()));
                }
                Ok(Box::new(HashedNgramEmbedder {
                    dimension: *dimension,
                    n: *n,
                }))
            }
            EmbedderConfig::Http { http, dimension } => {
                http.validate()?;
                Ok(Box::new(HttpEmbedder::new(http.settings(), http.api_key()?, *dimension)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub store: Option<PathBuf>,
    pub k: usize,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub summary_budget: usize,
    pub embedder: EmbedderConfig,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            store: None,
            k: DEFAULT_TOP_K,
            chunk_size: DEFAULT_CHUNK_SIZE,
            chunk_overlap: DEFAULT_CHUNK_OVERLAP,
            summary_budget: DEFAULT_SUMMARY_BUDGET,
            embedder: EmbedderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExecutorConfig {
    /// Fixture-table playback. Without `rules`, every candidate that passes
    /// the brace check passes all tests.
    Stub {
        #[serde(default)]
        rules: Option<PathBuf>,
    },
    Command(CommandExecutor),
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig::Stub { rules: None }
    }
}

impl ExecutorConfig {
    pub fn build(&self) -> Result<Box<dyn Executor>, ConfigError> {
        Ok(match self {
            ExecutorConfig::Stub { rules: None } => Box::new(StubExecutor::always_pass()),
            ExecutorConfig::Stub { rules: Some(p) } => Box::new(StubExecutor::from_file(p)?),
            ExecutorConfig::Command(c) => {
                c.validate()?;
                Box::new(c.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for per-sample pipelines; 0 uses all cores.
    pub workers: usize,
    pub backend: BackendConfig,
    /// Backend for the description stage; defaults to `backend`.
    pub describe_backend: Option<BackendConfig>,
    pub generation: GenerationConfig,
    pub strategy: StrategyConfig,
    pub retrieval: RetrievalConfig,
    pub executor: ExecutorConfig,
    pub limits: Limits,
    pub tolerance: Tolerance,
}


impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Loads a file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.backend.resolve(base);
        if let Some(d) = &mut self.describe_backend {
            d.resolve(base);
        }
        if let Some(s) = &mut self.retrieval.store {
            *s = base.join(&*s);
        }
        if let ExecutorConfig::Stub { rules: Some(r) } = &mut self.executor {
            *r = base.join(&*r);
        }
    }

    /// Checks everything that can be checked without touching a backend.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        self.backend.validate()?;
        if let Some(d) = &self.describe_backend {
            d.validate()?;
        }
        if self.workers > 1024 {
            return invalid("workers must be at most 1024");
        }
        if self.generation.max_output_tokens == 0 {
            return invalid("generation.max_output_tokens must be positive");
        }
        if !(0.0..=2.0).contains(&self.generation.temperature) {
            return invalid("generation.temperature must be within [0, 2]");
        }
        if self.strategy.max_iterations == 0 {
            return invalid("strategy.max_iterations must be at least 1");
        }
        if self.strategy.kind == Strategy::Rag && self.retrieval.store.is_none() {
            return invalid("the rag strategy needs retrieval.store");
        }
        if self.retrieval.k == 0 {
            return invalid("retrieval.k must be positive");
        }
        if self.retrieval.chunk_overlap >= self.retrieval.chunk_size {
            return invalid("retrieval.chunk_overlap must be smaller than chunk_size");
        }
        let t = self.tolerance;
        if !(t.rel.is_finite() && t.abs.is_finite() && t.rel >= 0.0 && t.abs >= 0.0) {
            return invalid("tolerances must be finite and non-negative");
        }
        if self.limits.compile.is_zero() || self.limits.run.is_zero() {
            return invalid("limits must be positive");
        }
        if let ExecutorConfig::Command(c) = &self.executor {
            c.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 7
workers = 4

[backend]
kind = "replay"
dir = "cache"

[backend.upstream]
endpoint = "http://127.0.0.1:8000/v1/chat/completions"
model = "qwen3-32b"
require_api_key = false
max_concurrency = 2

[describe_backend]
kind = "mock"
rules = "describe.json"

[generation]
model = "qwen3-32b"

[strategy]
kind = "rag"
iterative = true
max_iterations = 5

[retrieval]
store = "store.json"
k = 5

[retrieval.embedder]
kind = "hashed"
dimension = 256

[executor]
kind = "command"
compile = "dotnet build {src_dir} -o {out}"
run = "dotnet {out}/Harness.dll"

[limits]
compile = 30
run = 10

[tolerance]
rel = 1e-6
abs = 1e-9
"#;

    #[test]
    fn full_config_parses_and_validates() {
        let mut cfg = RunConfig::from_toml(FULL, "full.toml").unwrap();
        cfg.validate().unwrap();
        cfg.resolve_paths(Path::new("/etc/run"));
        assert_eq!(cfg.retrieval.store.as_deref(), Some(Path::new("/etc/run/store.json")));
        assert!(matches!(&cfg.backend, BackendConfig::Replay { dir, upstream: Some(_) } if dir == Path::new("/etc/run/cache")));
        assert_eq!(cfg.retrieval.embedder, EmbedderConfig::Hashed { dimension: 256, n: 3 });
        assert_eq!(cfg.limits.run, Duration::from_secs(10));
        assert!(matches!(cfg.executor, ExecutorConfig::Command(_)));
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_toml("[backend]\nkind = \"mock\"\ngolden = \"golden\"\n", "t").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.strategy.max_iterations, 5);
        assert_eq!(cfg.retrieval.k, 5);
        assert_eq!(cfg.executor, ExecutorConfig::Stub { rules: None });
        assert_eq!(cfg.tolerance, Tolerance::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "colour = 1",
            "[strategy]\nmax_iter = 5",
            "[backend]\nkind = \"http\"\nendpoint = \"http://x\"\nmodel = \"m\"\napi_key = \"sk-secret\"",
            "[executor]\nkind = \"command\"\ncompile = \"a\"\nrun = \"b\"\nshell = \"zsh\"",
            "[retrieval.embedder]\nkind = \"hashed\"\nsize = 3",
        ] {
            assert!(matches!(RunConfig::from_toml(text, "t"), Err(ConfigError::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn http_sections_parse() {
        let text = "[backend]\nkind = \"http\"\nendpoint = \"https://api.example.com/v1/chat/completions\"\nmodel = \"m\"\nwire = \"chatml-prompt\"\n\n[retrieval.embedder]\nkind = \"http\"\ndimension = 1024\n\n[retrieval.embedder.http]\nendpoint = \"https://api.example.com/v1/embeddings\"\nmodel = \"e\"\n";
        let cfg = RunConfig::from_toml(text, "t").unwrap();
        cfg.validate().unwrap();
        match &cfg.backend {
            BackendConfig::Http(h) => {
                assert_eq!(h.wire, WireFormat::ChatmlPrompt);
                assert!(h.require_api_key);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(cfg.retrieval.embedder, EmbedderConfig::Http { dimension: 1024, .. }));
    }

    #[test]
    fn semantic_checks() {
        let base = "[backend]\nkind = \"mock\"\nrules = \"r.json\"\n";
        for extra in [
            "[strategy]\nmax_iterations = 0",
            "[strategy]\nkind = \"rag\"",
            "[retrieval]\nk = 0",
            "[tolerance]\nrel = -1.0\nabs = 0.0",
            "[generation]\nmax_output_tokens = 0",
            "[limits]\ncompile = 0\nrun = 1",
        ] {
            let cfg = RunConfig::from_toml(&format!("{base}{extra}"), "t").unwrap();
            assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))), "{extra}");
        }
        let cfg = RunConfig::from_toml("", "t").unwrap();
        assert!(cfg.validate().is_err(), "mock without rules");
        let http = "[backend]\nkind = \"http\"\nendpoint = \"ftp://x\"\nmodel = \"m\"";
        assert!(RunConfig::from_toml(http, "t").unwrap().validate().is_err());
    }

    #[test]
    fn http_requires_key_unless_disabled() {
        let h = HttpConfig {
            endpoint: "http://127.0.0.1:1/v1".into(),
            model: "m".into(),
            wire: WireFormat::default(),
            timeout_secs: 1,
            retry: RetryPolicy::default(),
            max_concurrency: 0,
            require_api_key: false,
        };
        assert!(BackendConfig::Http(h.clone()).build().is_ok());
        if std::env::var(API_KEY_ENV).is_err() {
            let strict = HttpConfig { require_api_key: true, ..h };
            assert!(matches!(BackendConfig::Http(strict).build(), Err(ConfigError::Invalid(_))));
        }
    }

    #[test]
    fn builds_stub_and_mock() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.json"), r#"{"rules": [{"respond": "class A {}"}]}"#).unwrap();
        let cfg = RunConfig::load(&{
            let p = dir.path().join("run.toml");
            std::fs::write(&p, "[backend]\nkind = \"mock\"\nrules = \"r.json\"\n").unwrap();
            p
        })
        .unwrap();
        let backend = cfg.backend.build().unwrap();
        let req = crate::backends::GenerationRequest::new(vec![crate::backends::ChatMessage::user("x")], "mock");
        assert_eq!(backend.generate(&req).unwrap(), "class A {}");
        assert!(cfg.executor.build().is_ok());
        assert!(cfg.retrieval.embedder.build().unwrap().dimension() == 512);
    }
}
