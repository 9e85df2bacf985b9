//! Uniform access to chat-completion backends.
//!
//! [`ChatBackend`] is implemented by the live OpenAI-compatible client
//! ([`live::OpenAiBackend`]), the record/replay wrapper
//! ([`replay::ReplayBackend`]) and an in-process [`scripted::ScriptedBackend`]
//! used by tests and fixture recording.

pub mod live;
pub mod replay;
pub mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::TokenCounter;

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

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    /// System and user messages must carry content.
    pub fn is_valid(&self) -> bool {
        self.role == Role::Assistant || !self.content.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
}

impl GenerationParams {
    pub const GENERATION_TEMPERATURE: f64 = 0.7;
    pub const REFINEMENT_TEMPERATURE: f64 = 0.3;

    pub fn new(model_id: impl Into<String>, temperature: f64, max_output_tokens: u32) -> Self {
        Self {
            model_id: model_id.into(),
            temperature,
            max_output_tokens,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidParams(
                "maxOutputTokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BackendDescriptor {
    pub name: String,
    pub context_limit: u32,
    pub token_counter: TokenCounter,
    pub kind: BackendKind,
}

impl BackendDescriptor {
    pub fn new(name: impl Into<String>, context_limit: u32, kind: BackendKind) -> Self {
        Self {
            name: name.into(),
            context_limit,
            token_counter: TokenCounter::default(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend refused the request with status {status}: {body}")]
    BackendRefusal { status: u16, body: String },
    #[error("no recorded reply for request {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("request of {tokens} tokens plus {reserved} reserved exceeds the {limit}-token context")]
    BudgetViolation {
        tokens: usize,
        reserved: usize,
        limit: usize,
    },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("replay storage: {0}")]
    Storage(String),
    #[error("malformed backend reply: {0}")]
    MalformedReply(String),
}

pub trait ChatBackend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    /// One assistant reply for the given conversation.
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<ChatMessage, GatewayError>;

    /// Like [`complete`](Self::complete), reporting partial text through
    /// `on_chunk` as it arrives. Backends without incremental delivery emit
    /// the whole reply as a single chunk.
    fn complete_streaming(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<ChatMessage, GatewayError> {
        let reply = self.complete(messages, params)?;
        on_chunk(&reply.content);
        Ok(reply)
    }
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    messages: &'a [ChatMessage],
    model: &'a str,
    temperature: f64,
    seed: Option<i64>,
}

/// Stable content hash of a request: roles, contents, model, temperature and
/// seed. Output token limits and timestamps do not participate.
pub fn fingerprint(messages: &[ChatMessage], params: &GenerationParams) -> String {
    let input = FingerprintInput {
        messages,
        model: &params.model_id,
        temperature: params.temperature,
        seed: params.seed,
    };
    let bytes = serde_json::to_vec(&input).expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Checked completion: validates parameters and the context budget before
/// handing the request to `backend`.
pub fn complete(
    messages: &[ChatMessage],
    params: &GenerationParams,
    backend: &dyn ChatBackend,
) -> Result<ChatMessage, GatewayError> {
    complete_streaming(messages, params, backend, &mut |_| {})
}

pub fn complete_streaming(
    messages: &[ChatMessage],
    params: &GenerationParams,
    backend: &dyn ChatBackend,
    on_chunk: &mut dyn FnMut(&str),
) -> Result<ChatMessage, GatewayError> {
    params.validate()?;
    let descriptor = backend.descriptor();
    let tokens = descriptor.token_counter.count_messages(messages);
    let reserved = params.max_output_tokens as usize;
    let limit = descriptor.context_limit as usize;
    if tokens + reserved > limit {
        return Err(GatewayError::BudgetViolation {
            tokens,
            reserved,
            limit,
        });
    }
    let reply = backend.complete_streaming(messages, params, on_chunk)?;
    if reply.role != Role::Assistant {
        return Err(GatewayError::MalformedReply(format!(
            "expected an assistant message, got {}",
            reply.role
        )));
    }
    Ok(reply)
}
