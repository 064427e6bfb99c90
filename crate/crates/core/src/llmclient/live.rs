use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};
use crate::tokens::estimate_tokens;

/// Environment variable holding the bearer token for the live backend.
pub const API_KEY_ENV: &str = "PKGSENTRY_API_KEY";

/// OpenAI-compatible `/v1/chat/completions` client.
#[derive(Debug)]
pub struct LiveBackend {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: Option<WireMessage>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl LiveBackend {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Result<LiveBackend, LlmError> {
        if api_key.trim().is_empty() {
            return Err(LlmError::Config(format!("{API_KEY_ENV} is empty")));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(LiveBackend {
            http,
            endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.to_string(),
        })
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(base_url: &str) -> Result<LiveBackend, LlmError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| LlmError::Config(format!("{API_KEY_ENV} is not set")))?;
        LiveBackend::new(base_url, &key, Duration::from_secs(180))
    }
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    let value = headers.get(reqwest::header::RETRY_AFTER)?.to_str().ok()?;
    value.trim().parse::<f64>().ok().filter(|s| *s >= 0.0).map(Duration::from_secs_f64)
}

impl ChatBackend for LiveBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = json!({
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system_text},
                {"role": "user", "content": req.user_text},
            ],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "n": req.n,
        });
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::Transport {
                message: e.to_string(),
                retryable: true,
            })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(LlmError::RateLimited {
                retry_after: retry_after(resp.headers()),
            });
        }
        if status.is_server_error() {
            return Err(LlmError::Transport {
                message: format!("server error {status}"),
                retryable: true,
            });
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(LlmError::Rejected {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let wire: WireResponse = resp.json().map_err(|e| LlmError::Transport {
            message: format!("malformed response body: {e}"),
            retryable: true,
        })?;
        let texts: Vec<String> = wire
            .choices
            .into_iter()
            .map(|c| c.message.and_then(|m| m.content).unwrap_or_default())
            .collect();
        let (prompt_tokens, completion_tokens) = match wire.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (
                estimate_tokens(&req.system_text) as u64 + estimate_tokens(&req.user_text) as u64,
                texts.iter().map(|t| estimate_tokens(t) as u64).sum(),
            ),
        };
        Ok(ChatResponse {
            texts,
            prompt_tokens,
            completion_tokens,
            // Accounting uses the requested id; endpoints may report a dated alias.
            model_id: req.model_id.clone(),
        })
    }

    fn name(&self) -> &'static str {
        "live"
    }
}
