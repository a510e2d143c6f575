use std::time::{Duration, Instant};

use serde_json::{json, Value as Json};

use super::{
    estimate_cost, estimate_messages_tokens, estimate_tokens, ChatMessage, CompletionResult, GenerationParams,
    Provider, ProviderConfig, ProviderError, ProviderErrorKind,
};
use crate::workload::TraceRng;

/// OpenAI-compatible `chat/completions` client.
///
/// The key is read from the configured environment variable at call time and
/// only ever placed in the `Authorization` header.
pub struct HttpChatProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    jitter: TraceRng,
}

impl HttpChatProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        let seed = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        Ok(HttpChatProvider {
            config,
            agent,
            jitter: TraceRng::new(seed),
        })
    }

    fn api_key(&self) -> Result<String, ProviderError> {
        let var = self.config.api_key_env_var.as_deref().unwrap_or_default();
        match std::env::var(var) {
            Ok(key) if !key.is_empty() => Ok(key),
            _ => Err(ProviderError::new(
                ProviderErrorKind::Auth,
                format!("environment variable `{var}` is not set"),
            )),
        }
    }

    fn request_body(&self, messages: &[ChatMessage], params: &GenerationParams) -> Json {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
        });
        if let Some(t) = params.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(effort) = &params.reasoning_effort {
            body["reasoning_effort"] = json!(effort);
        }
        body
    }

    fn attempt(&self, key: &str, body: &str) -> Result<String, ProviderError> {
        let endpoint = self.config.endpoint.as_deref().unwrap_or_default();
        let response = self
            .agent
            .post(endpoint)
            .header("Authorization", format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = response.map_err(transport_error)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(transport_error)?;
        match status {
            200..=299 => Ok(text),
            401 | 403 => Err(ProviderError::new(
                ProviderErrorKind::Auth,
                format!("HTTP {status}: {}", snippet(&text)),
            )),
            429 => Err(ProviderError::new(
                ProviderErrorKind::RateLimit,
                format!("HTTP 429: {}", snippet(&text)),
            )),
            500..=599 => Err(ProviderError::new(
                ProviderErrorKind::Server,
                format!("HTTP {status}: {}", snippet(&text)),
            )),
            _ => Err(ProviderError::new(
                ProviderErrorKind::Request,
                format!("HTTP {status}: {}", snippet(&text)),
            )),
        }
    }

    fn backoff(&mut self, retry: u32) -> Duration {
        let base = self.config.retry_base_ms as f64 * 2f64.powi(retry as i32);
        let factor = 0.8 + 0.4 * self.jitter.uniform();
        Duration::from_secs_f64(base * factor / 1000.0)
    }
}

fn transport_error(e: ureq::Error) -> ProviderError {
    match e {
        ureq::Error::Timeout(_) => ProviderError::new(ProviderErrorKind::Timeout, e.to_string()),
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => {
            ProviderError::new(ProviderErrorKind::Timeout, e.to_string())
        }
        _ => ProviderError::new(ProviderErrorKind::Request, e.to_string()),
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

/// Text and reported usage of a chat-completion response.
pub(crate) fn parse_response(body: &str) -> Result<(String, Option<(u64, u64)>), ProviderError> {
    let malformed = |m: String| ProviderError::new(ProviderErrorKind::MalformedResponse, m);
    let json: Json = serde_json::from_str(body).map_err(|e| malformed(format!("response is not JSON: {e}")))?;
    let text = json
        .pointer("/choices/0/message/content")
        .and_then(Json::as_str)
        .ok_or_else(|| malformed(format!("no choices[0].message.content in {}", snippet(body))))?;
    let usage = json.get("usage").and_then(|u| {
        let p = u.get("prompt_tokens")?.as_u64()?;
        let c = u.get("completion_tokens")?.as_u64()?;
        Some((p, c))
    });
    Ok((text.to_string(), usage))
}

impl Provider for HttpChatProvider {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<CompletionResult, ProviderError> {
        let key = self.api_key()?;
        let body = self.request_body(messages, params).to_string();
        let start = Instant::now();
        let mut retry = 0;
        let raw = loop {
            match self.attempt(&key, &body) {
                Ok(raw) => break raw,
                Err(e) if e.kind.is_transient() && retry < self.config.max_retries => {
                    std::thread::sleep(self.backoff(retry));
                    retry += 1;
                }
                Err(mut e) => {
                    if retry > 0 {
                        e.message = format!("{} (after {retry} retries)", e.message);
                    }
                    return Err(e);
                }
            }
        };
        let (text, usage) = parse_response(&raw)?;
        let (tokens_in, tokens_out, estimated) = match usage {
            Some((i, o)) => (i, o, false),
            None => (estimate_messages_tokens(messages), estimate_tokens(&text), true),
        };
        Ok(CompletionResult {
            cost_usd: estimate_cost(tokens_in, tokens_out, self.config.price_table),
            text,
            tokens_in,
            tokens_out,
            latency_seconds: start.elapsed().as_secs_f64(),
            estimated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_usage() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":10,"completion_tokens":2}}"#;
        assert_eq!(parse_response(body).unwrap(), ("hi".to_string(), Some((10, 2))));
    }

    #[test]
    fn missing_usage_is_none() {
        let body = r#"{"choices":[{"message":{"content":"hi"}}]}"#;
        assert_eq!(parse_response(body).unwrap().1, None);
    }

    #[test]
    fn malformed_bodies() {
        for body in [
            "<html>",
            "{}",
            r#"{"choices":[]}"#,
            r#"{"choices":[{"message":{"content":3}}]}"#,
        ] {
            assert_eq!(
                parse_response(body).unwrap_err().kind,
                ProviderErrorKind::MalformedResponse,
                "{body}"
            );
        }
    }

    #[test]
    fn backoff_doubles_with_jitter() {
        let mut cfg = ProviderConfig::http_chat("http://127.0.0.1:1", "UNSET_KEY_VAR", "m");
        cfg.retry_base_ms = 1000;
        let mut p = HttpChatProvider::new(cfg).unwrap();
        for retry in 0..4 {
            let d = p.backoff(retry).as_secs_f64();
            let nominal = 2f64.powi(retry as i32);
            assert!(d >= nominal * 0.8 - 1e-9 && d <= nominal * 1.2 + 1e-9, "{retry}: {d}");
        }
    }
}
