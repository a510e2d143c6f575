//! Chat-completion providers, scripted replay, code extraction, and cost accounting.

#[cfg(feature = "http")]
mod http;
mod scripted;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "http")]
pub use http::HttpChatProvider;
pub use scripted::{script_files, scripted_complete, ScriptedProvider};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// USD per one million tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub input_per_mtok: f64,
    pub output_per_mtok: f64,
}

impl PriceTable {
    pub fn new(input_per_mtok: f64, output_per_mtok: f64) -> Self {
        PriceTable {
            input_per_mtok,
            output_per_mtok,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HttpChat,
    Scripted,
}

fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    3
}
fn default_retry_base_ms() -> u64 {
    1000
}

/// Provider settings. Only the *name* of the API key variable is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Backoff before the first retry; doubles per retry, jittered by +-20%.
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
    #[serde(default)]
    pub price_table: PriceTable,
}

impl ProviderConfig {
    pub fn scripted(script_dir: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Scripted,
            endpoint: None,
            api_key_env_var: None,
            script_dir: Some(script_dir.into()),
            model: "scripted".into(),
            timeout_seconds: default_timeout(),
            max_retries: default_retries(),
            retry_base_ms: default_retry_base_ms(),
            price_table: PriceTable::default(),
        }
    }

    pub fn http_chat(
        endpoint: impl Into<String>,
        api_key_env_var: impl Into<String>,
        model: impl Into<String>,
    ) -> Self {
        ProviderConfig {
            kind: ProviderKind::HttpChat,
            endpoint: Some(endpoint.into()),
            api_key_env_var: Some(api_key_env_var.into()),
            script_dir: None,
            model: model.into(),
            timeout_seconds: default_timeout(),
            max_retries: default_retries(),
            retry_base_ms: default_retry_base_ms(),
            price_table: PriceTable::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::new(ProviderErrorKind::Config, m));
        if !(self.timeout_seconds > 0.0 && self.timeout_seconds.is_finite()) {
            return bad("timeout_seconds must be > 0");
        }
        let PriceTable {
            input_per_mtok,
            output_per_mtok,
        } = self.price_table;
        if !(input_per_mtok >= 0.0 && output_per_mtok >= 0.0) {
            return bad("prices must be >= 0");
        }
        match self.kind {
            ProviderKind::HttpChat if self.endpoint.is_none() => bad("http_chat needs `endpoint`"),
            ProviderKind::HttpChat if self.api_key_env_var.is_none() => bad("http_chat needs `api_key_env_var`"),
            ProviderKind::Scripted if self.script_dir.is_none() => bad("scripted needs `script_dir`"),
            _ => Ok(()),
        }
    }
}

/// Sampling knobs passed through to the endpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Opaque label forwarded as `reasoning_effort`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cost_usd: f64,
    pub latency_seconds: f64,
    /// Token counts came from [`estimate_tokens`] rather than reported usage.
    pub estimated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorKind {
    Auth,
    Timeout,
    RateLimit,
    Server,
    Request,
    MalformedResponse,
    ScriptExhausted,
    Config,
}

impl ProviderErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderErrorKind::Auth => "auth",
            ProviderErrorKind::Timeout => "timeout",
            ProviderErrorKind::RateLimit => "rate_limit",
            ProviderErrorKind::Server => "server",
            ProviderErrorKind::Request => "request",
            ProviderErrorKind::MalformedResponse => "malformed_response",
            ProviderErrorKind::ScriptExhausted => "script_exhausted",
            ProviderErrorKind::Config => "config",
        }
    }

    /// Worth another attempt: timeouts, 429 and 5xx.
    pub fn is_transient(self) -> bool {
        matches!(
            self,
            ProviderErrorKind::Timeout | ProviderErrorKind::RateLimit | ProviderErrorKind::Server
        )
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("provider error ({}): {message}", kind.as_str())]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub message: String,
}

impl ProviderError {
    pub fn new(kind: ProviderErrorKind, message: impl Into<String>) -> Self {
        ProviderError {
            kind,
            message: message.into(),
        }
    }
}

pub trait Provider {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<CompletionResult, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<CompletionResult, ProviderError> {
        (**self).complete(messages, params)
    }
}

pub fn provider_from_config(config: &ProviderConfig) -> Result<Box<dyn Provider>, ProviderError> {
    config.validate()?;
    match config.kind {
        ProviderKind::Scripted => Ok(Box::new(ScriptedProvider::new(config)?)),
        #[cfg(feature = "http")]
        ProviderKind::HttpChat => Ok(Box::new(HttpChatProvider::new(config.clone())?)),
        #[cfg(not(feature = "http"))]
        ProviderKind::HttpChat => Err(ProviderError::new(
            ProviderErrorKind::Config,
            "built without the `http` feature",
        )),
    }
}

/// `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

pub fn estimate_messages_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| estimate_tokens(&m.content)).sum()
}

pub fn estimate_cost(tokens_in: u64, tokens_out: u64, prices: PriceTable) -> f64 {
    tokens_in as f64 / 1e6 * prices.input_per_mtok + tokens_out as f64 / 1e6 * prices.output_per_mtok
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct ExtractionError {
    pub message: String,
}

impl ExtractionError {
    pub const HINT: &'static str = "wrap the policy in a fenced code block";
}

/// Contents of the first fenced code block. Without any fence, the whole
/// text is accepted if it parses as a policy program.
pub fn extract_code_block(text: &str) -> Result<String, ExtractionError> {
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let trimmed = line.trim_start();
        if let Some(fence) = fence_of(trimmed) {
            let mut body = Vec::new();
            for inner in lines.by_ref() {
                let t = inner.trim();
                if t.len() >= 3 && t.chars().all(|c| c == fence) {
                    break;
                }
                body.push(inner);
            }
            let mut src = body.join("\n");
            src.push('\n');
            return Ok(src);
        }
    }
    match crate::policy::parse(text) {
        Ok(_) => Ok(text.to_string()),
        Err(e) => Err(ExtractionError {
            message: format!("no fenced code block, and the response is not a policy program by itself ({e})"),
        }),
    }
}

fn fence_of(line: &str) -> Option<char> {
    ['`', '~']
        .into_iter()
        .find(|&c| line.starts_with(&c.to_string().repeat(3)))
}
