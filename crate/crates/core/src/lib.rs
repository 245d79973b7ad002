//! Core of the arabiq quiz platform: turns an image into Arabic vocabulary
//! quizzes through a captioning model and a quiz-writing model, checks the
//! generated Arabic, stores everything as JSONL, and reproduces the human
//! evaluation reports.

pub mod config;
pub mod eval;
pub mod gateway;
pub mod ids;
pub mod lint;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod store;
pub mod text;

pub use config::{ConfigError, ProviderConfig};
pub use eval::{aggregate_score, AggregateScore, AnnotationRecord, SubjectType};
pub use gateway::{Gateway, GatewayError};
pub use ids::{new_ulid, sha256_hex};
pub use lint::{
    detect_code_switch, detect_duplicates, diacritic_coverage, lint_quiz, LintConfig, LintReport,
    Linter,
};
pub use model::*;
pub use parser::{parse_quiz_block, serialize_quiz, strip_bidi_controls, ParseOutcome, QuizDraft};
pub use pipeline::{
    AttemptRecord, Feedback, LearnerQuizSet, Pipeline, PipelineError, QuizSet, Session,
};
pub use store::{BenchmarkManifest, Filter, IngestReport, Store, StoreError};
