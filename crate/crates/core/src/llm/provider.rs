// SPDX-License-Identifier: Apache-2.0

//! Model clients: a scripted mock, transcript replay and recording, and an
//! HTTP client for OpenAI-compatible chat endpoints.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{Stage, StageConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn total(self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    /// Worth retrying: rate limits, timeouts, server errors.
    #[error("transient provider error: {message}")]
    Transient { message: String, usage: Option<TokenUsage> },
    #[error("provider error: {message}")]
    Permanent { message: String, usage: Option<TokenUsage> },
}

impl ProviderError {
    pub fn transient(message: impl Into<String>) -> Self {
        ProviderError::Transient { message: message.into(), usage: None }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        ProviderError::Permanent { message: message.into(), usage: None }
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Transient { .. })
    }

    pub fn usage(&self) -> Option<TokenUsage> {
        match self {
            ProviderError::Transient { usage, .. } | ProviderError::Permanent { usage, .. } => *usage,
        }
    }
}

/// Anything that turns a prompt into a completion.
pub trait ProviderClient: Send + Sync {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError>;
}

/// Token estimate for providers that report none: whitespace-separated
/// words.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

type Responder = dyn Fn(Stage, &str) -> Result<String, ProviderError> + Send + Sync;

/// Answers from a closure and keeps every prompt it was shown. Token counts
/// use [`approx_tokens`].
pub struct MockProvider {
    respond: Box<Responder>,
    calls: AtomicUsize,
    prompts: Mutex<Vec<(Stage, String)>>,
}

impl MockProvider {
    pub fn new(respond: impl Fn(Stage, &str) -> Result<String, ProviderError> + Send + Sync + 'static) -> Self {
        MockProvider { respond: Box::new(respond), calls: AtomicUsize::new(0), prompts: Mutex::new(Vec::new()) }
    }

    /// Always returns the same text for a stage; other stages fail
    /// permanently.
    pub fn fixed(responses: HashMap<Stage, String>) -> Self {
        MockProvider::new(move |stage, _| {
            responses.get(&stage).cloned().ok_or_else(|| ProviderError::permanent(format!("no mock reply for {stage}")))
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<(Stage, String)> {
        self.prompts.lock().expect("mock prompt log").clone()
    }
}

impl ProviderClient for MockProvider {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts.lock().expect("mock prompt log").push((cfg.stage, prompt.to_string()));
        let text = (self.respond)(cfg.stage, prompt)?;
        let usage = TokenUsage { input_tokens: approx_tokens(prompt), output_tokens: approx_tokens(&text) };
        Ok(Completion { text, usage })
    }
}

/// One recorded exchange. Transcripts are JSON Lines of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub prompt_sha256: String,
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot access transcript {path}: {message}")]
    Io { path: String, message: String },
    #[error("transcript line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TranscriptError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_transcript(&text)
}

pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptEntry>, TranscriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| TranscriptError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

/// Serves recorded completions keyed by stage and prompt hash. Repeated
/// identical prompts consume their recordings in order; the last one is
/// reused once the queue runs dry.
pub struct ReplayProvider {
    entries: Mutex<HashMap<(Stage, String), VecDeque<TranscriptEntry>>>,
    calls: AtomicUsize,
}

impl ReplayProvider {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        let mut map: HashMap<(Stage, String), VecDeque<TranscriptEntry>> = HashMap::new();
        for e in entries {
            map.entry((e.stage, e.prompt_sha256.clone())).or_default().push_back(e);
        }
        ReplayProvider { entries: Mutex::new(map), calls: AtomicUsize::new(0) }
    }

    pub fn from_file(path: &Path) -> Result<Self, TranscriptError> {
        Ok(ReplayProvider::new(read_transcript(path)?))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ProviderClient for ReplayProvider {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = (cfg.stage, prompt_digest(prompt));
        let mut map = self.entries.lock().expect("replay table");
        let queue = map
            .get_mut(&key)
            .ok_or_else(|| ProviderError::permanent(format!("no recorded {} completion for prompt {}", cfg.stage, key.1)))?;
        let entry = if queue.len() > 1 { queue.pop_front().expect("non-empty") } else { queue[0].clone() };
        Ok(Completion {
            text: entry.text,
            usage: TokenUsage { input_tokens: entry.input_tokens, output_tokens: entry.output_tokens },
        })
    }
}

/// Wraps another client and appends each successful exchange to a
/// transcript file.
pub struct RecordingProvider<P> {
    inner: P,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<P: ProviderClient> RecordingProvider<P> {
    pub fn new(inner: P, path: impl Into<PathBuf>) -> Self {
        RecordingProvider { inner, path: path.into(), lock: Mutex::new(()) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: ProviderClient> ProviderClient for RecordingProvider<P> {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError> {
        let completion = self.inner.complete(prompt, cfg)?;
        let entry = TranscriptEntry {
            stage: cfg.stage,
            prompt_sha256: prompt_digest(prompt),
            text: completion.text.clone(),
            input_tokens: completion.usage.input_tokens,
            output_tokens: completion.usage.output_tokens,
        };
        let line = serde_json::to_string(&entry).expect("transcript entry serializes");
        let _guard = self.lock.lock().expect("transcript writer");
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| ProviderError::permanent(format!("cannot record transcript: {e}")))?;
        writeln!(file, "{line}").map_err(|e| ProviderError::permanent(format!("cannot record transcript: {e}")))?;
        Ok(completion)
    }
}

pub const API_KEY_ENV: &str = "TABLECANON_API_KEY";
pub const API_BASE_ENV: &str = "TABLECANON_API_BASE";
pub const MODEL_ENV: &str = "TABLECANON_MODEL";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o";

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
#[cfg(feature = "live")]
pub struct LiveProvider {
    client: reqwest::blocking::Client,
    base: String,
    model: String,
    api_key: String,
}

#[cfg(feature = "live")]
impl LiveProvider {
    /// Reads the key, base URL and model from the environment.
    pub fn from_env() -> Result<Self, ProviderError> {
        let api_key = std::env::var(API_KEY_ENV)
            .map_err(|_| ProviderError::permanent(format!("{API_KEY_ENV} is not set")))?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        let model = std::env::var(MODEL_ENV).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(600))
            .build()
            .map_err(|e| ProviderError::permanent(e.to_string()))?;
        Ok(LiveProvider { client, base: base.trim_end_matches('/').to_string(), model, api_key })
    }
}

#[cfg(feature = "live")]
impl ProviderClient for LiveProvider {
    fn complete(&self, prompt: &str, cfg: &StageConfig) -> Result<Completion, ProviderError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": cfg.max_output_tokens,
            "temperature": cfg.temperature,
        });
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::transient(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| ProviderError::transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(ProviderError::transient(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(ProviderError::permanent(format!("HTTP {status}: {text}")));
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::permanent(format!("bad response body: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::permanent("response has no message content"))?
            .to_string();
        let usage = TokenUsage {
            input_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or_else(|| approx_tokens(prompt)),
            output_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or_else(|| approx_tokens(&content)),
        };
        Ok(Completion { text: content, usage })
    }
}
