//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use reqwest::StatusCode;
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, ChatBackend, ChatMessage, GatewayError, GenerationParams, Role};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

const BODY_EXCERPT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): doubles each time.
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: Role,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<i64>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    #[serde(default)]
    content: Option<String>,
}

/// Serialized request body; identical inputs give identical bytes.
pub fn request_body(messages: &[ChatMessage], params: &GenerationParams) -> Vec<u8> {
    let request = WireRequest {
        model: &params.model_id,
        messages: messages
            .iter()
            .map(|m| WireMessage {
                role: m.role,
                content: &m.content,
            })
            .collect(),
        temperature: params.temperature,
        max_tokens: params.max_output_tokens,
        seed: params.seed,
    };
    serde_json::to_vec(&request).expect("request serializes")
}

/// First choice's content from a chat-completions response body.
pub fn parse_response(body: &[u8]) -> Result<String, GatewayError> {
    let response: WireResponse = serde_json::from_slice(body)
        .map_err(|e| GatewayError::MalformedReply(e.to_string()))?;
    response
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| GatewayError::MalformedReply("response has no choices".into()))
}

fn excerpt(body: &str) -> String {
    match body.char_indices().nth(BODY_EXCERPT) {
        Some((cut, _)) => format!("{}…", &body[..cut]),
        None => body.to_owned(),
    }
}

fn retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}

pub struct OpenAiBackend {
    descriptor: BackendDescriptor,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: Client,
}

impl OpenAiBackend {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(
        descriptor: BackendDescriptor,
        base_url: &str,
        api_key: Option<String>,
    ) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .no_proxy()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            descriptor,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            retry: RetryPolicy::default(),
            client,
        })
    }

    /// Reads the bearer token from [`API_KEY_ENV`].
    pub fn from_env(descriptor: BackendDescriptor, base_url: &str) -> Result<Self, GatewayError> {
        Self::new(descriptor, base_url, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl ChatBackend for OpenAiBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<ChatMessage, GatewayError> {
        let body = request_body(messages, params);
        let attempts = self.retry.max_attempts.max(1);
        let mut last_failure = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                thread::sleep(self.retry.backoff(attempt - 1));
            }
            let mut request = self
                .client
                .post(&self.endpoint)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.clone());
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            debug!("POST {} (attempt {attempt}/{attempts})", self.endpoint);
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().unwrap_or_default();
                    if status.is_success() {
                        return parse_response(text.as_bytes()).map(ChatMessage::assistant);
                    }
                    if !retryable(status) {
                        return Err(GatewayError::BackendRefusal {
                            status: status.as_u16(),
                            body: excerpt(&text),
                        });
                    }
                    warn!("backend returned {status} on attempt {attempt}");
                    last_failure = format!("status {}: {}", status.as_u16(), excerpt(&text));
                }
                Err(err) => {
                    warn!("transport error on attempt {attempt}: {err}");
                    last_failure = err.to_string();
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last_failure,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_body_snapshot() {
        let messages = vec![ChatMessage::system("You plan."), ChatMessage::user("Go")];
        let mut params = GenerationParams::new("gpt-4", 0.7, 1024);
        assert_eq!(
            String::from_utf8(request_body(&messages, &params)).unwrap(),
            r#"{"model":"gpt-4","messages":[{"role":"system","content":"You plan."},{"role":"user","content":"Go"}],"temperature":0.7,"max_tokens":1024}"#
        );
        params.seed = Some(42);
        assert!(
            String::from_utf8(request_body(&messages, &params))
                .unwrap()
                .ends_with(r#""max_tokens":1024,"seed":42}"#)
        );
    }

    #[test]
    fn response_first_choice() {
        let body = br#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"hi"}},{"index":1,"message":{"role":"assistant","content":"no"}}]}"#;
        assert_eq!(parse_response(body).unwrap(), "hi");
        assert!(matches!(
            parse_response(br#"{"choices":[]}"#),
            Err(GatewayError::MalformedReply(_))
        ));
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(1), Duration::from_millis(500));
        assert_eq!(p.backoff(2), Duration::from_millis(1000));
    }
}
