//! Calls to the captioning and quiz-writing models.
//!
//! Real providers are reached through a [`Transport`] (OpenAI-compatible by
//! default); `Mock` profiles are answered from [`MockFixtures`]. Every call
//! for a profile holds one of that profile's `max_parallel` permits.

mod mock;
mod openai;
mod prompt;
mod retry;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

pub use mock::{describe_fixture_key, fixture_key, quiz_fixture_key, MockFixture, MockFixtures};
pub use openai::{parse_response, request_body, OpenAiTransport};
pub use prompt::{
    describe_prompt, number_word, placeholders, quiz_prompt, render_prompt, BARE_DESCRIBE_PROMPT,
};
pub use retry::{is_retryable, RetryPolicy, Sleeper, TokioSleeper};

use crate::ids::{new_ulid, sha256_hex};
use crate::model::{
    Description, ImageRecord, ImageSource, Modality, PromptCondition, PromptTemplate,
    ProviderProfile,
};

pub const DESCRIBE_TEMPERATURE: f32 = 0.2;
pub const QUIZ_TEMPERATURE: f32 = 0.7;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider returned HTTP {status}: {body}")]
    ProviderHttp { status: u16, body: String },
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("could not fetch image: {0}")]
    ImageFetchFailed(String),
    #[error("no mock fixture for key {key}")]
    MockFixtureMissing { key: String },
    #[error("template placeholder {{{0}}} has no value")]
    MissingVar(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("fixture file: {0}")]
    Fixture(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageAttachment {
    Inline { bytes: Vec<u8>, media_type: String },
    Url(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    pub image: Option<ImageAttachment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let images = self.messages.iter().filter(|m| m.image.is_some()).count();
        if images > 1 {
            return Err(GatewayError::InvalidRequest(
                "at most one image per request".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn has_image(&self) -> bool {
        self.messages.iter().any(|m| m.image.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub provider_latency_ms: u64,
    pub raw_finish_reason: String,
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn send(
        &self,
        profile: &ProviderProfile,
        req: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError>;
}

/// Supplies image bytes for captioning requests. `Ok(None)` means the image
/// should be passed by URL instead.
pub trait ImageFetcher: Send + Sync {
    fn fetch(&self, img: &ImageRecord) -> Result<Option<Vec<u8>>, String>;
}

/// Reads uploads from the filesystem path in the locator.
pub struct FsImageFetcher;

impl ImageFetcher for FsImageFetcher {
    fn fetch(&self, img: &ImageRecord) -> Result<Option<Vec<u8>>, String> {
        match img.source {
            ImageSource::Url => Ok(None),
            ImageSource::Upload => std::fs::read(&img.locator)
                .map(Some)
                .map_err(|e| format!("{}: {e}", img.locator)),
        }
    }
}

pub fn sniff_media_type(bytes: &[u8]) -> &'static str {
    match bytes {
        [0x89, b'P', b'N', b'G', ..] => "image/png",
        [0xff, 0xd8, 0xff, ..] => "image/jpeg",
        [b'G', b'I', b'F', b'8', ..] => "image/gif",
        [b'R', b'I', b'F', b'F', _, _, _, _, b'W', b'E', b'B', b'P', ..] => "image/webp",
        _ => "application/octet-stream",
    }
}

/// Joins paragraphs into one, for the prompted condition's single-paragraph rule.
fn single_paragraph(text: &str) -> String {
    text.split("\n")
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    sleeper: Arc<dyn Sleeper>,
    fetcher: Arc<dyn ImageFetcher>,
    fixtures: MockFixtures,
    retry: RetryPolicy,
    permits: Mutex<HashMap<String, Arc<Semaphore>>>,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Self {
            transport,
            sleeper: Arc::new(TokioSleeper),
            fetcher: Arc::new(FsImageFetcher),
            fixtures: MockFixtures::new(),
            retry: RetryPolicy::default(),
            permits: Mutex::new(HashMap::new()),
        }
    }

    /// OpenAI-compatible transport, with fixtures loaded from every mock
    /// profile's `fixture_file` (relative paths resolve against `base_dir`).
    pub fn for_profiles<'a>(
        profiles: impl IntoIterator<Item = &'a ProviderProfile>,
        base_dir: &Path,
    ) -> Result<Self, GatewayError> {
        let mut fixtures = MockFixtures::new();
        let mut loaded: Vec<std::path::PathBuf> = Vec::new();
        for p in profiles {
            if let (Modality::Mock, Some(file)) = (p.modality, &p.fixture_file) {
                let path = base_dir.join(file);
                if !loaded.contains(&path) {
                    fixtures.merge(MockFixtures::load(&path)?)?;
                    loaded.push(path);
                }
            }
        }
        Ok(Self::new(Arc::new(OpenAiTransport::new())).with_fixtures(fixtures))
    }

    pub fn with_fixtures(mut self, fixtures: MockFixtures) -> Self {
        self.fixtures = fixtures;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_fetcher(mut self, fetcher: Arc<dyn ImageFetcher>) -> Self {
        self.fetcher = fetcher;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn fixtures(&self) -> &MockFixtures {
        &self.fixtures
    }

    fn semaphore(&self, profile: &ProviderProfile) -> Arc<Semaphore> {
        let mut map = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(profile.profile_id.clone())
            .or_insert_with(|| Arc::new(Semaphore::new(profile.max_parallel.max(1))))
            .clone()
    }

    async fn mock_lookup(
        &self,
        profile: &ProviderProfile,
        key: String,
    ) -> Result<String, GatewayError> {
        let sem = self.semaphore(profile);
        let _permit = sem.acquire().await.expect("semaphore never closed");
        self.fixtures
            .get(&key)
            .map(str::to_string)
            .ok_or(GatewayError::MockFixtureMissing { key })
    }

    /// Sends `req`, retrying timeouts, 429 and 5xx up to `profile.max_retries`
    /// times with full-jitter exponential backoff.
    pub async fn execute_with_retry(
        &self,
        req: &ChatRequest,
        profile: &ProviderProfile,
    ) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let sem = self.semaphore(profile);
        let mut attempt = 0u32;
        loop {
            let result = {
                let _permit = sem.acquire().await.expect("semaphore never closed");
                self.transport.send(profile, req).await
            };
            match result {
                Ok(resp) => return Ok(resp),
                Err(e) if is_retryable(&e) && attempt < profile.max_retries => {
                    let delay = self.retry.delay(attempt, &mut rand::rng());
                    tracing::debug!(profile = %profile.profile_id, attempt, ?delay, error = %e, "retrying");
                    self.sleeper.sleep(delay).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Captions `img` with the vision model. The returned description is not
    /// persisted.
    pub async fn describe_image(
        &self,
        img: &ImageRecord,
        profile: &ProviderProfile,
        condition: PromptCondition,
        template: &PromptTemplate,
    ) -> Result<Description, GatewayError> {
        if !matches!(profile.modality, Modality::Vision | Modality::Mock) {
            return Err(GatewayError::InvalidRequest(format!(
                "profile {} cannot caption images",
                profile.profile_id
            )));
        }
        let prompt = describe_prompt(condition, template)?;
        let raw = if profile.modality == Modality::Mock {
            self.mock_lookup(
                profile,
                fixture_key(&prompt, &img.sha256, &profile.model_name),
            )
            .await?
        } else {
            let attachment = match self
                .fetcher
                .fetch(img)
                .map_err(GatewayError::ImageFetchFailed)?
            {
                Some(bytes) => ImageAttachment::Inline {
                    media_type: sniff_media_type(&bytes).to_string(),
                    bytes,
                },
                None => ImageAttachment::Url(img.locator.clone()),
            };
            let req = ChatRequest {
                model_name: profile.model_name.clone(),
                messages: vec![ChatMessage {
                    role: Role::User,
                    text: prompt,
                    image: Some(attachment),
                }],
                temperature: DESCRIBE_TEMPERATURE,
                max_tokens: 512,
            };
            self.execute_with_retry(&req, profile).await?.text
        };
        let mut text = raw.trim().to_string();
        if text.is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        if condition == PromptCondition::Prompted {
            text = single_paragraph(&text);
        }
        Ok(Description {
            id: new_ulid(),
            image_id: img.id.clone(),
            model_id: profile.profile_id.clone(),
            condition,
            text,
            created_at: Utc::now(),
        })
    }

    /// Asks the quiz model for `n_questions` questions about `d`; returns the
    /// raw reply untouched.
    pub async fn generate_quiz_text(
        &self,
        d: &Description,
        profile: &ProviderProfile,
        n_questions: u32,
        template: &PromptTemplate,
    ) -> Result<String, GatewayError> {
        if n_questions == 0 {
            return Err(GatewayError::InvalidRequest(
                "n_questions must be at least 1".into(),
            ));
        }
        if !matches!(profile.modality, Modality::Text | Modality::Mock) {
            return Err(GatewayError::InvalidRequest(format!(
                "profile {} cannot generate quizzes",
                profile.profile_id
            )));
        }
        let prompt = quiz_prompt(&d.text, n_questions, template)?;
        let text = if profile.modality == Modality::Mock {
            self.mock_lookup(
                profile,
                fixture_key(&prompt, &sha256_hex(&d.text), &profile.model_name),
            )
            .await?
        } else {
            let req = ChatRequest {
                model_name: profile.model_name.clone(),
                messages: vec![ChatMessage {
                    role: Role::User,
                    text: prompt,
                    image: None,
                }],
                temperature: QUIZ_TEMPERATURE,
                max_tokens: 400 + 200 * n_questions.min(20),
            };
            self.execute_with_retry(&req, profile).await?.text
        };
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        Ok(text)
    }
}
