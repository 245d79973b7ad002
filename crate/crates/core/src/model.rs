//! Shared domain types and structural quiz validation.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::sha256_hex;
use crate::text;

pub const OPTION_LABELS: [char; 4] = ['a', 'b', 'c', 'd'];

pub fn is_option_label(c: char) -> bool {
    OPTION_LABELS.contains(&c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityCategory {
    Simple,
    Moderate,
    Complex,
}

impl ComplexityCategory {
    pub const ALL: [ComplexityCategory; 3] = [Self::Simple, Self::Moderate, Self::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Moderate => "moderate",
            Self::Complex => "complex",
        }
    }
}

impl fmt::Display for ComplexityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComplexityCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "simple" => Ok(Self::Simple),
            "moderate" => Ok(Self::Moderate),
            "complex" => Ok(Self::Complex),
            other => Err(format!("unknown complexity category {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Upload,
    Url,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub source: ImageSource,
    /// Original path or URL the image came from.
    pub locator: String,
    pub sha256: String,
    pub complexity: ComplexityCategory,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptCondition {
    Prompted,
    Bare,
}

impl PromptCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Prompted => "prompted",
            Self::Bare => "bare",
        }
    }
}

impl fmt::Display for PromptCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prompted" => Ok(Self::Prompted),
            "bare" => Ok(Self::Bare),
            other => Err(format!("unknown prompt condition {other:?}")),
        }
    }
}

/// Caption produced by the vision model. Never shown to learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub id: String,
    pub image_id: String,
    pub model_id: String,
    pub condition: PromptCondition,
    pub text: String,
    pub created_at: DateTime<Utc>,
}

impl Description {
    /// Text invariants: non-empty, and a single paragraph under the prompted condition.
    pub fn text_is_valid(&self) -> bool {
        let t = self.text.trim();
        if t.is_empty() {
            return false;
        }
        self.condition == PromptCondition::Bare || !has_blank_line(t)
    }
}

pub(crate) fn has_blank_line(s: &str) -> bool {
    let mut seen_text = false;
    let mut gap = false;
    for line in s.lines() {
        if line.trim().is_empty() {
            gap |= seen_text;
        } else if gap {
            return true;
        } else {
            seen_text = true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillTag {
    Actions,
    Objects,
    Colors,
    Adjectives,
    Untagged,
}

impl SkillTag {
    /// Parses a header tag such as `Actions`; anything unrecognised is `Untagged`.
    pub fn from_tag(tag: &str) -> SkillTag {
        match tag.trim().to_ascii_lowercase().as_str() {
            "actions" | "action" => Self::Actions,
            "objects" | "object" => Self::Objects,
            "colors" | "color" | "colours" | "colour" => Self::Colors,
            "adjectives" | "adjective" => Self::Adjectives,
            _ => Self::Untagged,
        }
    }

    pub fn header_name(self) -> Option<&'static str> {
        match self {
            Self::Actions => Some("Actions"),
            Self::Objects => Some("Objects"),
            Self::Colors => Some("Colors"),
            Self::Adjectives => Some("Adjectives"),
            Self::Untagged => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizOption {
    pub label: char,
    pub text_ar: String,
}

impl QuizOption {
    /// Builds an option with its text NFC-normalized, bidi-stripped and trimmed.
    pub fn new(label: char, text_ar: &str) -> Self {
        Self {
            label,
            text_ar: text::canonical(text_ar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quiz {
    pub id: String,
    pub image_id: String,
    pub description_id: String,
    pub model_id: String,
    pub ordinal: u32,
    pub stem: String,
    pub options: Vec<QuizOption>,
    pub declared_correct: char,
    pub skill: SkillTag,
    /// Text that followed the label in the model's "Correct answer" clause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_correct_text: Option<String>,
}

impl Quiz {
    pub fn option(&self, label: char) -> Option<&QuizOption> {
        self.options.iter().find(|o| o.label == label)
    }

    pub fn correct_option(&self) -> Option<&QuizOption> {
        self.option(self.declared_correct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    OptionCount,
    LabelUnknown,
    DuplicateLabel,
    MissingLabel,
    CorrectLabelUnknown,
    EmptyOption,
    EmptyStem,
    OrdinalZero,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OptionCount => "OPTION_COUNT",
            Self::LabelUnknown => "LABEL_UNKNOWN",
            Self::DuplicateLabel => "DUPLICATE_LABEL",
            Self::MissingLabel => "MISSING_LABEL",
            Self::CorrectLabelUnknown => "CORRECT_LABEL_UNKNOWN",
            Self::EmptyOption => "EMPTY_OPTION",
            Self::EmptyStem => "EMPTY_STEM",
            Self::OrdinalZero => "ORDINAL_ZERO",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// Checks every structural quiz invariant and lists each violation found.
pub fn validate_quiz(q: &Quiz) -> ValidationResult {
    let mut violations = Vec::new();
    let mut push =
        |code: ViolationCode, message: String| violations.push(Violation { code, message });

    if q.ordinal == 0 {
        push(
            ViolationCode::OrdinalZero,
            "ordinal must be positive".into(),
        );
    }
    if q.stem.trim().is_empty() {
        push(ViolationCode::EmptyStem, "stem is empty".into());
    }
    if q.options.len() != 4 {
        push(
            ViolationCode::OptionCount,
            format!("expected 4 options, found {}", q.options.len()),
        );
    }
    let mut seen = Vec::with_capacity(4);
    for opt in &q.options {
        if !is_option_label(opt.label) {
            push(
                ViolationCode::LabelUnknown,
                format!("option label {:?} not in a-d", opt.label),
            );
        } else if seen.contains(&opt.label) {
            push(
                ViolationCode::DuplicateLabel,
                format!("label {:?} appears more than once", opt.label),
            );
        } else {
            seen.push(opt.label);
        }
        if opt.text_ar.trim().is_empty() {
            push(
                ViolationCode::EmptyOption,
                format!("option {:?} has empty text", opt.label),
            );
        }
    }
    for label in OPTION_LABELS {
        if !seen.contains(&label) {
            push(
                ViolationCode::MissingLabel,
                format!("no option labelled {label:?}"),
            );
        }
    }
    if !is_option_label(q.declared_correct) {
        push(
            ViolationCode::CorrectLabelUnknown,
            format!("declared correct label {:?} not in a-d", q.declared_correct),
        );
    }
    ValidationResult { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Vision,
    Text,
    Mock,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    2
}

fn default_max_parallel() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderProfile {
    #[serde(default)]
    pub profile_id: String,
    #[serde(default)]
    pub endpoint_url: String,
    pub model_name: String,
    pub modality: Modality,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    /// JSONL fixture file answering requests for `Mock` profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_file: Option<String>,
}

impl ProviderProfile {
    pub fn mock(profile_id: &str, model_name: &str) -> Self {
        Self {
            profile_id: profile_id.to_string(),
            endpoint_url: String::new(),
            model_name: model_name.to_string(),
            modality: Modality::Mock,
            api_key_env: String::new(),
            timeout_ms: default_timeout_ms(),
            max_retries: 0,
            max_parallel: default_max_parallel(),
            fixture_file: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_ms < 1000 {
            return Err(format!(
                "profile {}: timeout_ms must be >= 1000",
                self.profile_id
            ));
        }
        if self.max_parallel < 1 {
            return Err(format!(
                "profile {}: max_parallel must be >= 1",
                self.profile_id
            ));
        }
        if self.model_name.trim().is_empty() {
            return Err(format!("profile {}: model_name is empty", self.profile_id));
        }
        if self.modality != Modality::Mock && self.endpoint_url.trim().is_empty() {
            return Err(format!(
                "profile {}: endpoint_url is empty",
                self.profile_id
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateTask {
    DescribeImage,
    GenerateQuiz,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub task: TemplateTask,
    pub body: String,
    pub version_hash: String,
}

pub const DEFAULT_DESCRIBE_PROMPT: &str = include_str!("../../../config/prompts/describe.txt");
pub const DEFAULT_QUIZ_PROMPT: &str = include_str!("../../../config/prompts/quiz.txt");

impl PromptTemplate {
    pub fn new(template_id: &str, task: TemplateTask, body: &str) -> Result<Self, String> {
        let t = Self {
            template_id: template_id.to_string(),
            task,
            body: body.to_string(),
            version_hash: sha256_hex(body.as_bytes()),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.task == TemplateTask::GenerateQuiz {
            for needed in ["{description}", "{n_questions}"] {
                if !self.body.contains(needed) {
                    return Err(format!(
                        "template {} lacks required placeholder {needed}",
                        self.template_id
                    ));
                }
            }
        }
        if self.version_hash != sha256_hex(self.body.as_bytes()) {
            return Err(format!(
                "template {} version_hash does not match body",
                self.template_id
            ));
        }
        Ok(())
    }

    pub fn default_describe() -> Self {
        Self::new(
            "describe-default",
            TemplateTask::DescribeImage,
            DEFAULT_DESCRIBE_PROMPT.trim_end(),
        )
        .expect("shipped describe template is valid")
    }

    pub fn default_quiz() -> Self {
        Self::new(
            "quiz-default",
            TemplateTask::GenerateQuiz,
            DEFAULT_QUIZ_PROMPT.trim_end(),
        )
        .expect("shipped quiz template is valid")
    }
}
