//! OpenAI-compatible `/chat/completions` transport.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{ChatRequest, ChatResponse, GatewayError, ImageAttachment, Role, Transport};
use crate::model::ProviderProfile;

pub struct OpenAiTransport {
    client: reqwest::Client,
}

impl Default for OpenAiTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl OpenAiTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::Client::new(),
        }
    }
}

/// JSON body for a chat completion request. Images travel as `image_url`
/// parts: either the https URL itself or a base64 data URL.
pub fn request_body(req: &ChatRequest) -> Value {
    let messages: Vec<Value> = req
        .messages
        .iter()
        .map(|m| {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
            };
            match &m.image {
                None => json!({ "role": role, "content": m.text }),
                Some(img) => {
                    let url = match img {
                        ImageAttachment::Url(u) => u.clone(),
                        ImageAttachment::Inline { bytes, media_type } => format!(
                            "data:{media_type};base64,{}",
                            base64::engine::general_purpose::STANDARD.encode(bytes)
                        ),
                    };
                    json!({
                        "role": role,
                        "content": [
                            { "type": "text", "text": m.text },
                            { "type": "image_url", "image_url": { "url": url } },
                        ]
                    })
                }
            }
        })
        .collect();
    json!({
        "model": req.model_name,
        "messages": messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

pub fn parse_response(body: &str, latency_ms: u64) -> Result<ChatResponse, GatewayError> {
    let parsed: CompletionBody = serde_json::from_str(body)
        .map_err(|e| GatewayError::Network(format!("malformed completion body: {e}")))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or(GatewayError::EmptyResponse)?;
    Ok(ChatResponse {
        text: choice.message.content.unwrap_or_default(),
        provider_latency_ms: latency_ms,
        raw_finish_reason: choice.finish_reason.unwrap_or_default(),
    })
}

#[async_trait]
impl Transport for OpenAiTransport {
    async fn send(
        &self,
        profile: &ProviderProfile,
        req: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let url = format!(
            "{}/chat/completions",
            profile.endpoint_url.trim_end_matches('/')
        );
        let mut builder = self
            .client
            .post(&url)
            .timeout(Duration::from_millis(profile.timeout_ms))
            .json(&request_body(req));
        if !profile.api_key_env.is_empty() {
            let key = std::env::var(&profile.api_key_env).map_err(|_| {
                GatewayError::InvalidRequest(format!(
                    "environment variable {} is not set",
                    profile.api_key_env
                ))
            })?;
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let resp = builder.send().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::ProviderTimeout
            } else {
                GatewayError::Network(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| {
            if e.is_timeout() {
                GatewayError::ProviderTimeout
            } else {
                GatewayError::Network(e.to_string())
            }
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if !(200..300).contains(&status) {
            return Err(GatewayError::ProviderHttp {
                status,
                body: body.chars().take(500).collect(),
            });
        }
        parse_response(&body, latency_ms)
    }
}
