//! Image → description → quiz set → lint gate → delivery, plus answer
//! feedback and batch generation over stored images.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex, PoisonError};

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{aggregate_score, AnnotationRecord, SubjectType};
use crate::gateway::{Gateway, GatewayError};
use crate::ids::new_ulid;
use crate::lint::{LintReport, Linter};
use crate::model::{
    is_option_label, validate_quiz, ComplexityCategory, Description, ImageRecord, PromptCondition,
    PromptTemplate, ProviderProfile, Quiz, QuizOption, SkillTag, Violation,
};
use crate::parser::{parse_quiz_block, Diagnostic};
use crate::store::{Filter, Store, StoreError};

pub const DEFAULT_N_QUESTIONS: u32 = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no generated question passed validation ({} rejected, {} parse diagnostics)", .0.rejected.len(), .0.diagnostics.len())]
    AllQuizzesRejected(Box<QuizSet>),
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("unknown quiz {0}")]
    UnknownQuiz(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("label {0:?} is not one of a, b, c, d")]
    InvalidLabel(char),
    #[error("quiz {0} was never delivered to learners")]
    QuizNotDelivered(String),
}

/// A question that did not make it to learners, with the reasons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub quiz_id: String,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<LintReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizSet {
    pub id: String,
    pub image_id: String,
    pub description_id: String,
    pub quiz_model_id: String,
    /// Ids of quizzes cleared for delivery, in question order.
    pub quizzes: Vec<String>,
    pub rejected: Vec<Rejection>,
    /// Parser diagnostics for the raw model reply.
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub id: String,
    pub session_id: String,
    pub quiz_id: String,
    pub chosen_label: char,
    pub is_correct: bool,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKey {
    Correct,
    IncorrectShowAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub is_correct: bool,
    pub correct_label: char,
    pub correct_text_ar: String,
    pub message_key: MessageKey,
}

/// Anonymous learner session. Attempt counts are derived from stored
/// attempts, see [`Progress`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub native_language: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub session_id: String,
    pub attempts: u32,
    pub correct: u32,
}

/// What a learner sees of a quiz: no answer key, no description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerQuiz {
    pub quiz_id: String,
    pub ordinal: u32,
    pub stem: String,
    pub skill: SkillTag,
    pub options: Vec<QuizOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerQuizSet {
    pub quiz_set_id: String,
    pub image_id: String,
    pub quizzes: Vec<LearnerQuiz>,
}

impl From<&Quiz> for LearnerQuiz {
    fn from(q: &Quiz) -> Self {
        Self {
            quiz_id: q.id.clone(),
            ordinal: q.ordinal,
            stem: q.stem.clone(),
            skill: q.skill,
            options: q.options.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Templates {
    pub describe: PromptTemplate,
    pub quiz: PromptTemplate,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            describe: PromptTemplate::default_describe(),
            quiz: PromptTemplate::default_quiz(),
        }
    }
}

pub struct Pipeline {
    store: Arc<Store>,
    gateway: Arc<Gateway>,
    templates: Templates,
    linter: Linter,
    // (session, quiz) -> feedback; built from stored attempts on first use
    answers: Mutex<Option<HashMap<(String, String), Feedback>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFailure {
    pub image_id: String,
    pub profile_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub descriptions: usize,
    pub quizzes: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub images: usize,
    pub descriptions_created: usize,
    pub descriptions_skipped: usize,
    pub description_failures: usize,
    pub quiz_sets_created: usize,
    pub quiz_sets_skipped: usize,
    pub quiz_set_failures: usize,
    /// Parsed questions stored, delivered or not.
    pub quizzes_created: usize,
    pub rejected_count: usize,
    pub per_category: BTreeMap<ComplexityCategory, CategoryStats>,
    pub failures: Vec<BatchFailure>,
}

#[derive(Debug, Clone)]
pub struct BatchRequest {
    pub filter: Filter,
    pub vision_profiles: Vec<ProviderProfile>,
    pub quiz_profiles: Vec<ProviderProfile>,
    pub conditions: Vec<PromptCondition>,
    pub n_questions: u32,
}

impl Pipeline {
    pub fn new(store: Arc<Store>, gateway: Arc<Gateway>) -> Self {
        Self {
            store,
            gateway,
            templates: Templates::default(),
            linter: Linter::default(),
            answers: Mutex::new(None),
        }
    }

    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_linter(mut self, linter: Linter) -> Self {
        self.linter = linter;
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// Full learner flow for one image. The description is stored but never
    /// returned to the learner.
    pub async fn run_vision_quiz(
        &self,
        image_id: &str,
        vision: &ProviderProfile,
        quiz: &ProviderProfile,
        condition: PromptCondition,
        n_questions: u32,
    ) -> Result<QuizSet, PipelineError> {
        let img: ImageRecord = self
            .store
            .get(image_id)
            .map_err(|_| PipelineError::UnknownImage(image_id.to_string()))?;
        let d = self
            .gateway
            .describe_image(&img, vision, condition, &self.templates.describe)
            .await?;
        self.store.put(&d)?;
        let set = self.quiz_set_for(&d, quiz, n_questions).await?;
        if set.quizzes.is_empty() {
            return Err(PipelineError::AllQuizzesRejected(Box::new(set)));
        }
        Ok(set)
    }

    /// Generates, parses, validates and lints questions for `d`, then stores
    /// every parsed quiz, its lint report, and the resulting set.
    pub async fn quiz_set_for(
        &self,
        d: &Description,
        quiz: &ProviderProfile,
        n: u32,
    ) -> Result<QuizSet, PipelineError> {
        let raw = self
            .gateway
            .generate_quiz_text(d, quiz, n, &self.templates.quiz)
            .await?;
        let outcome = parse_quiz_block(&raw);

        let mut quizzes = Vec::new();
        let mut reports = Vec::new();
        let mut delivered = Vec::new();
        let mut rejected = Vec::new();
        for draft in outcome.quizzes {
            let q = draft.into_quiz(
                new_ulid(),
                d.image_id.clone(),
                d.id.clone(),
                quiz.profile_id.clone(),
            );
            let v = validate_quiz(&q);
            if !v.is_ok() {
                rejected.push(Rejection {
                    quiz_id: q.id.clone(),
                    violations: v.violations,
                    report: None,
                });
            } else {
                let report = self.linter.lint_quiz(&q);
                if report.pass {
                    delivered.push(q.id.clone());
                } else {
                    rejected.push(Rejection {
                        quiz_id: q.id.clone(),
                        violations: Vec::new(),
                        report: Some(report.clone()),
                    });
                }
                reports.push(report);
            }
            quizzes.push(q);
        }

        let set = QuizSet {
            id: new_ulid(),
            image_id: d.image_id.clone(),
            description_id: d.id.clone(),
            quiz_model_id: quiz.profile_id.clone(),
            quizzes: delivered,
            rejected,
            diagnostics: outcome.diagnostics,
            created_at: Utc::now(),
        };
        if !quizzes.is_empty() {
            self.store.put_batch(&quizzes)?;
        }
        if !reports.is_empty() {
            self.store.put_batch(&reports)?;
        }
        self.store.put(&set)?;
        Ok(set)
    }

    /// The learner-facing form of a stored set: delivered quizzes only.
    pub fn learner_view(&self, set: &QuizSet) -> Result<LearnerQuizSet, PipelineError> {
        let quizzes = set
            .quizzes
            .iter()
            .map(|id| self.store.get::<Quiz>(id).map(|q| LearnerQuiz::from(&q)))
            .collect::<Result<_, _>>()?;
        Ok(LearnerQuizSet {
            quiz_set_id: set.id.clone(),
            image_id: set.image_id.clone(),
            quizzes,
        })
    }

    pub fn create_session(&self, native_language: Option<&str>) -> Result<Session, PipelineError> {
        let s = Session {
            session_id: new_ulid(),
            native_language: native_language
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .unwrap_or("en")
                .to_string(),
            created_at: Utc::now(),
        };
        self.store.put(&s)?;
        Ok(s)
    }

    pub fn is_delivered(&self, quiz: &Quiz) -> Result<bool, PipelineError> {
        Ok(self
            .store
            .list::<QuizSet>(&Filter::image(&quiz.image_id))?
            .iter()
            .any(|s| s.quizzes.contains(&quiz.id)))
    }

    fn lock_answers(
        &self,
    ) -> std::sync::MutexGuard<'_, Option<HashMap<(String, String), Feedback>>> {
        self.answers.lock().unwrap_or_else(PoisonError::into_inner)
    }

    /// Records an answer and returns feedback. A repeated answer for the same
    /// (session, quiz) returns the first feedback and records nothing.
    pub fn submit_answer(
        &self,
        session_id: &str,
        quiz_id: &str,
        chosen: char,
    ) -> Result<Feedback, PipelineError> {
        let label = chosen.to_ascii_lowercase();
        if !is_option_label(label) {
            return Err(PipelineError::InvalidLabel(chosen));
        }
        if !self.store.contains::<Session>(session_id) {
            return Err(PipelineError::UnknownSession(session_id.to_string()));
        }
        let quiz: Quiz = self
            .store
            .get(quiz_id)
            .map_err(|_| PipelineError::UnknownQuiz(quiz_id.to_string()))?;

        let mut guard = self.lock_answers();
        if guard.is_none() {
            *guard = Some(self.load_answers()?);
        }
        let answers = guard.as_mut().expect("just loaded");
        let key = (session_id.to_string(), quiz_id.to_string());
        if let Some(fb) = answers.get(&key) {
            return Ok(fb.clone());
        }
        if !self.is_delivered(&quiz)? {
            return Err(PipelineError::QuizNotDelivered(quiz_id.to_string()));
        }
        let fb = feedback(&quiz, label);
        self.store.put(&AttemptRecord {
            id: new_ulid(),
            session_id: session_id.to_string(),
            quiz_id: quiz_id.to_string(),
            chosen_label: label,
            is_correct: fb.is_correct,
            created_at: Utc::now(),
        })?;
        answers.insert(key, fb.clone());
        Ok(fb)
    }

    fn load_answers(&self) -> Result<HashMap<(String, String), Feedback>, PipelineError> {
        let mut map = HashMap::new();
        for a in self.store.list::<AttemptRecord>(&Filter::all())? {
            let key = (a.session_id.clone(), a.quiz_id.clone());
            if map.contains_key(&key) {
                continue;
            }
            let q: Quiz = self.store.get(&a.quiz_id)?;
            map.insert(key, feedback(&q, a.chosen_label));
        }
        Ok(map)
    }

    pub fn attempted(&self, session_id: &str, quiz_id: &str) -> Result<bool, PipelineError> {
        let mut guard = self.lock_answers();
        if guard.is_none() {
            *guard = Some(self.load_answers()?);
        }
        Ok(guard
            .as_ref()
            .expect("just loaded")
            .contains_key(&(session_id.to_string(), quiz_id.to_string())))
    }

    pub fn progress(&self, session_id: &str) -> Result<Progress, PipelineError> {
        if !self.store.contains::<Session>(session_id) {
            return Err(PipelineError::UnknownSession(session_id.to_string()));
        }
        let attempts: Vec<AttemptRecord> = self
            .store
            .list::<AttemptRecord>(&Filter::all())?
            .into_iter()
            .filter(|a| a.session_id == session_id)
            .collect();
        Ok(Progress {
            session_id: session_id.to_string(),
            attempts: attempts.len() as u32,
            correct: attempts.iter().filter(|a| a.is_correct).count() as u32,
        })
    }

    /// The description quizzes are generated from: the highest aggregate
    /// human score when any description of the image is annotated, else the
    /// prompted description from the first vision profile.
    pub fn best_description(
        descriptions: &[Description],
        annotations: &HashMap<String, Vec<AnnotationRecord>>,
        first_vision_profile: Option<&str>,
    ) -> Option<Description> {
        let scored = descriptions
            .iter()
            .filter_map(|d| {
                let recs = annotations.get(&d.id)?;
                let mean = aggregate_score(recs).ok()?.mean_hundredths()?;
                Some((mean, d))
            })
            .fold(None::<(u64, &Description)>, |best, (m, d)| match best {
                Some((bm, _)) if bm >= m => best,
                _ => Some((m, d)),
            });
        if let Some((_, d)) = scored {
            return Some(d.clone());
        }
        descriptions
            .iter()
            .find(|d| {
                d.condition == PromptCondition::Prompted
                    && Some(d.model_id.as_str()) == first_vision_profile
            })
            .or_else(|| {
                descriptions
                    .iter()
                    .find(|d| d.condition == PromptCondition::Prompted)
            })
            .or_else(|| descriptions.first())
            .cloned()
    }

    /// Runs the generation grid over every image matching the filter.
    /// Already stored (image, profile, condition) descriptions and
    /// (description, quiz profile) sets are skipped, so a rerun only fills
    /// gaps. Item failures are collected in the stats.
    pub async fn batch_generate(&self, req: &BatchRequest) -> Result<BatchStats, PipelineError> {
        let images: Vec<ImageRecord> = self.store.list(&req.filter)?;
        let mut stats = BatchStats {
            images: images.len(),
            ..BatchStats::default()
        };
        if images.is_empty() {
            return Ok(stats);
        }
        for c in ComplexityCategory::ALL {
            stats.per_category.insert(c, CategoryStats::default());
        }
        let concurrency = |profiles: &[ProviderProfile]| {
            profiles
                .iter()
                .map(|p| p.max_parallel.max(1))
                .sum::<usize>()
                .max(1)
        };

        // phase 1: descriptions
        let existing: HashSet<(String, String, PromptCondition)> = self
            .store
            .list::<Description>(&Filter::all())?
            .into_iter()
            .map(|d| (d.image_id, d.model_id, d.condition))
            .collect();
        let mut jobs = Vec::new();
        for img in &images {
            for vp in &req.vision_profiles {
                for &cond in &req.conditions {
                    if existing.contains(&(img.id.clone(), vp.profile_id.clone(), cond)) {
                        stats.descriptions_skipped += 1;
                    } else {
                        jobs.push((img, vp, cond));
                    }
                }
            }
        }
        let results: Vec<_> = stream::iter(jobs)
            .map(|(img, vp, cond)| async move {
                let r = self
                    .gateway
                    .describe_image(img, vp, cond, &self.templates.describe)
                    .await
                    .map_err(PipelineError::from)
                    .and_then(|d| {
                        self.store.put(&d)?;
                        Ok(d)
                    });
                (img, vp, r)
            })
            .buffer_unordered(concurrency(&req.vision_profiles))
            .collect()
            .await;
        for (img, vp, r) in results {
            match r {
                Ok(_) => {
                    stats.descriptions_created += 1;
                    stats
                        .per_category
                        .get_mut(&img.complexity)
                        .unwrap()
                        .descriptions += 1;
                }
                Err(e) => {
                    stats.description_failures += 1;
                    stats.failures.push(BatchFailure {
                        image_id: img.id.clone(),
                        profile_id: vp.profile_id.clone(),
                        stage: "describe".into(),
                        message: e.to_string(),
                    });
                }
            }
        }

        // phase 2: quiz sets from the selected description
        if req.quiz_profiles.is_empty() {
            return Ok(stats);
        }
        let mut by_image: HashMap<String, Vec<Description>> = HashMap::new();
        for d in self.store.list::<Description>(&Filter::all())? {
            by_image.entry(d.image_id.clone()).or_default().push(d);
        }
        let mut annotations: HashMap<String, Vec<AnnotationRecord>> = HashMap::new();
        for a in self.store.list::<AnnotationRecord>(&Filter::all())? {
            if a.subject_type == SubjectType::Description {
                annotations.entry(a.subject_id.clone()).or_default().push(a);
            }
        }
        let done: HashSet<(String, String)> = self
            .store
            .list::<QuizSet>(&Filter::all())?
            .into_iter()
            .map(|s| (s.description_id, s.quiz_model_id))
            .collect();
        let first_vision = req.vision_profiles.first().map(|p| p.profile_id.as_str());
        let mut jobs = Vec::new();
        for img in &images {
            let best = by_image
                .get(&img.id)
                .and_then(|ds| Self::best_description(ds, &annotations, first_vision));
            for qp in &req.quiz_profiles {
                match &best {
                    None => {
                        stats.quiz_set_failures += 1;
                        stats.failures.push(BatchFailure {
                            image_id: img.id.clone(),
                            profile_id: qp.profile_id.clone(),
                            stage: "quiz".into(),
                            message: "image has no description".into(),
                        });
                    }
                    Some(d) if done.contains(&(d.id.clone(), qp.profile_id.clone())) => {
                        stats.quiz_sets_skipped += 1
                    }
                    Some(d) => jobs.push((img, d.clone(), qp)),
                }
            }
        }
        let results: Vec<_> = stream::iter(jobs)
            .map(|(img, d, qp)| async move {
                (img, qp, self.quiz_set_for(&d, qp, req.n_questions).await)
            })
            .buffer_unordered(concurrency(&req.quiz_profiles))
            .collect()
            .await;
        for (img, qp, r) in results {
            match r {
                Ok(set) => {
                    let n = set.quizzes.len() + set.rejected.len();
                    stats.quiz_sets_created += 1;
                    stats.quizzes_created += n;
                    stats.rejected_count += set.rejected.len();
                    let c = stats.per_category.get_mut(&img.complexity).unwrap();
                    c.quizzes += n;
                    c.rejected += set.rejected.len();
                }
                Err(e) => {
                    stats.quiz_set_failures += 1;
                    stats.failures.push(BatchFailure {
                        image_id: img.id.clone(),
                        profile_id: qp.profile_id.clone(),
                        stage: "quiz".into(),
                        message: e.to_string(),
                    });
                }
            }
        }
        if let Err(e) = self.store.write_manifest() {
            tracing::warn!(error = %e, "could not refresh manifest.json");
        }
        Ok(stats)
    }
}

/// Feedback for choosing `label` on `quiz`.
pub fn feedback(quiz: &Quiz, label: char) -> Feedback {
    let is_correct = label == quiz.declared_correct;
    Feedback {
        is_correct,
        correct_label: quiz.declared_correct,
        correct_text_ar: quiz
            .correct_option()
            .map(|o| o.text_ar.clone())
            .unwrap_or_default(),
        message_key: if is_correct {
            MessageKey::Correct
        } else {
            MessageKey::IncorrectShowAnswer
        },
    }
}
