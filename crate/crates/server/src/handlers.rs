use std::sync::Arc;

use arabiq_core::gateway::sniff_media_type;
use arabiq_core::lint::LintReport;
use arabiq_core::pipeline::{LearnerQuiz, QuizSet, DEFAULT_N_QUESTIONS};
use arabiq_core::{
    ComplexityCategory, Description, Filter, ImageRecord, ImageSource, Modality, PromptCondition,
    Quiz, StoreError,
};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Redirect, Response};
use axum::Json;
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::AppState;

type AppStateRef = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

/// Largest question count one quiz-set request may ask for.
const MAX_QUESTIONS: u32 = 10;

pub async fn no_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint")
}

pub async fn openapi() -> Json<Value> {
    Json(crate::openapi_document())
}

#[derive(Serialize)]
pub struct ProfileView {
    profile_id: String,
    model_name: String,
    modality: Modality,
}

pub async fn list_profiles(State(st): AppStateRef) -> Json<Vec<ProfileView>> {
    Json(
        st.config
            .providers
            .profiles
            .values()
            .map(|p| ProfileView {
                profile_id: p.profile_id.clone(),
                model_name: p.model_name.clone(),
                modality: p.modality,
            })
            .collect(),
    )
}

#[derive(Deserialize, Default)]
pub struct NewSession {
    native_language: Option<String>,
}

pub async fn create_session(
    State(st): AppStateRef,
    body: Result<Option<Json<NewSession>>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let body = body
        .map_err(|e| ApiError::bad_request(e.body_text()))?
        .map(|Json(b)| b)
        .unwrap_or_default();
    let s = st
        .pipeline
        .create_session(body.native_language.as_deref())?;
    Ok((StatusCode::CREATED, Json(s)))
}

pub async fn progress(
    State(st): AppStateRef,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.pipeline.progress(&id)?))
}

#[derive(Deserialize)]
pub struct UrlImage {
    url: String,
    complexity: Option<String>,
}

fn parse_complexity(raw: Option<&str>) -> ApiResult<ComplexityCategory> {
    match raw.map(str::trim).filter(|s| !s.is_empty()) {
        // new images wait for an admin to tag them
        None => Ok(ComplexityCategory::Moderate),
        Some(s) => s.parse().map_err(ApiError::bad_request),
    }
}

fn check_allowed(raw: &str, allowlist: &[String]) -> ApiResult<()> {
    let url = url::Url::parse(raw)
        .map_err(|e| ApiError::bad_request(format!("invalid URL {raw:?}: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(ApiError::bad_request(format!(
            "unsupported URL scheme {:?}",
            url.scheme()
        )));
    }
    let host = url
        .host_str()
        .ok_or_else(|| ApiError::bad_request("URL has no host"))?
        .to_ascii_lowercase();
    let allowed = allowlist.iter().any(|d| {
        let d = d.to_ascii_lowercase();
        host == d || host.ends_with(&format!(".{d}"))
    });
    if allowed {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "url_not_allowed",
            format!("images may only come from: {}", allowlist.join(", ")),
        ))
    }
}

fn duplicate(st: &AppState, sha: &str) -> ApiError {
    let existing = st.pipeline.store().find_image_by_sha(sha).map(|i| i.id);
    ApiError::new(
        StatusCode::CONFLICT,
        "duplicate_image",
        "this image is already stored",
    )
    .with_extra(json!({"existing_id": existing}))
}

/// JSON `{url, complexity?}` or a multipart form with a `file` part and an
/// optional `complexity` field.
pub async fn add_image(State(st): AppStateRef, req: Request) -> ApiResult<impl IntoResponse> {
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let store = st.pipeline.store();
    let limit = st.config.max_image_bytes;

    let result = if is_multipart {
        let mut form = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let mut file: Option<(Vec<u8>, String)> = None;
        let mut complexity: Option<String> = None;
        loop {
            let field = match form.next_field().await {
                Ok(Some(f)) => f,
                Ok(None) => break,
                Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => {
                    return Err(ApiError::too_large(limit))
                }
                Err(e) => return Err(ApiError::bad_request(e.body_text())),
            };
            let name = field.name().unwrap_or_default().to_string();
            let file_name = field.file_name().map(str::to_string);
            let data = match field.bytes().await {
                Ok(d) => d,
                Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => {
                    return Err(ApiError::too_large(limit))
                }
                Err(e) => return Err(ApiError::bad_request(e.body_text())),
            };
            match name.as_str() {
                "file" => {
                    file = Some((data.to_vec(), file_name.unwrap_or_else(|| "upload".into())))
                }
                "complexity" => complexity = Some(String::from_utf8_lossy(&data).into_owned()),
                _ => {}
            }
        }
        let (bytes, name) = file.ok_or_else(|| ApiError::bad_request("form has no `file` part"))?;
        if bytes.len() > limit {
            return Err(ApiError::too_large(limit));
        }
        if sniff_media_type(&bytes) == "application/octet-stream" {
            return Err(ApiError::bad_request(
                "file is not a PNG, JPEG, GIF or WebP image",
            ));
        }
        let complexity = parse_complexity(complexity.as_deref())?;
        store.put_image_bytes(&bytes, ImageSource::Upload, &name, complexity)
    } else {
        let Json(body) = Json::<UrlImage>::from_request(req, &())
            .await
            .map_err(|e| {
                if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                    ApiError::too_large(limit)
                } else {
                    ApiError::bad_request(e.body_text())
                }
            })?;
        check_allowed(&body.url, &st.config.allowlist)?;
        let complexity = parse_complexity(body.complexity.as_deref())?;
        store.put_image_url(&body.url, complexity, None)
    };
    match result {
        Ok(img) => Ok((StatusCode::CREATED, Json(img))),
        Err(StoreError::DuplicateSha(sha)) => Err(duplicate(&st, &sha)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Deserialize)]
pub struct ImageQuery {
    complexity: Option<String>,
}

fn images(st: &AppState, q: &ImageQuery) -> ApiResult<Vec<ImageRecord>> {
    let filter = match q
        .complexity
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        Some(c) => Filter::complexity(c.parse().map_err(ApiError::bad_request)?),
        None => Filter::all(),
    };
    Ok(st.pipeline.store().list(&filter)?)
}

pub async fn list_images(
    State(st): AppStateRef,
    Query(q): Query<ImageQuery>,
) -> ApiResult<Json<Vec<ImageRecord>>> {
    Ok(Json(images(&st, &q)?))
}

pub async fn random_image(
    State(st): AppStateRef,
    Query(q): Query<ImageQuery>,
) -> ApiResult<Json<ImageRecord>> {
    let all = images(&st, &q)?;
    all.choose(&mut rand::rng())
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("no images match"))
}

pub async fn get_image(
    State(st): AppStateRef,
    Path(id): Path<String>,
) -> ApiResult<Json<ImageRecord>> {
    Ok(Json(st.pipeline.store().get(&id)?))
}

/// Uploaded bytes, or a redirect to the original URL.
pub async fn image_content(State(st): AppStateRef, Path(id): Path<String>) -> ApiResult<Response> {
    let img: ImageRecord = st.pipeline.store().get(&id)?;
    match img.source {
        ImageSource::Url => Ok(Redirect::temporary(&img.locator).into_response()),
        ImageSource::Upload => {
            let bytes = st.pipeline.store().read_blob(&img.sha256)?;
            Ok(([(header::CONTENT_TYPE, sniff_media_type(&bytes))], bytes).into_response())
        }
    }
}

#[derive(Deserialize)]
pub struct QuizSetRequest {
    vision_profile: String,
    quiz_profile: String,
    #[serde(default)]
    condition: Option<PromptCondition>,
    #[serde(default)]
    n: Option<u32>,
}

pub async fn create_quiz_set(
    State(st): AppStateRef,
    Path(id): Path<String>,
    body: Result<Json<QuizSetRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    if !st.pipeline.store().contains::<ImageRecord>(&id) {
        return Err(ApiError::not_found(format!("unknown image {id}")));
    }
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let providers = &st.config.providers;
    let vision = providers
        .get(&req.vision_profile)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let quiz = providers
        .get(&req.quiz_profile)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let n = req.n.unwrap_or(DEFAULT_N_QUESTIONS);
    if !(1..=MAX_QUESTIONS).contains(&n) {
        return Err(ApiError::bad_request(format!(
            "n must be between 1 and {MAX_QUESTIONS}"
        )));
    }
    let condition = req.condition.unwrap_or(PromptCondition::Prompted);
    let set = st
        .pipeline
        .run_vision_quiz(&id, vision, quiz, condition, n)
        .await?;
    Ok((StatusCode::CREATED, Json(st.pipeline.learner_view(&set)?)))
}

pub async fn get_quiz_set(
    State(st): AppStateRef,
    Path(id): Path<String>,
) -> ApiResult<impl IntoResponse> {
    let set: QuizSet = st.pipeline.store().get(&id)?;
    Ok(Json(st.pipeline.learner_view(&set)?))
}

#[derive(Deserialize)]
pub struct RandomQuizQuery {
    session_id: Option<String>,
}

/// One delivered question, preferring ones the session has not answered.
pub async fn random_quiz(
    State(st): AppStateRef,
    Path(id): Path<String>,
    Query(q): Query<RandomQuizQuery>,
) -> ApiResult<Json<LearnerQuiz>> {
    let set: QuizSet = st.pipeline.store().get(&id)?;
    let mut pool = set.quizzes.clone();
    if let Some(session) = &q.session_id {
        let mut fresh = Vec::new();
        for quiz_id in &pool {
            if !st.pipeline.attempted(session, quiz_id)? {
                fresh.push(quiz_id.clone());
            }
        }
        if !fresh.is_empty() {
            pool = fresh;
        }
    }
    let pick = pool
        .choose(&mut rand::rng())
        .cloned()
        .ok_or_else(|| ApiError::not_found("quiz set has no delivered questions"))?;
    let quiz: Quiz = st.pipeline.store().get(&pick)?;
    Ok(Json(LearnerQuiz::from(&quiz)))
}

#[derive(Deserialize)]
pub struct AnswerRequest {
    session_id: String,
    label: String,
}

pub async fn answer(
    State(st): AppStateRef,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let mut chars = req.label.trim().chars();
    let label = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_label",
                format!("label {:?} is not one of a, b, c, d", req.label),
            ))
        }
    };
    Ok(Json(st.pipeline.submit_answer(
        &req.session_id,
        &id,
        label,
    )?))
}

fn require_admin(st: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let given = headers.get("x-admin-token").and_then(|v| v.to_str().ok());
    match (&st.config.admin_token, given) {
        (Some(want), Some(got)) if want.as_bytes() == got.as_bytes() => Ok(()),
        _ => Err(ApiError::unauthorized()),
    }
}

#[derive(Serialize)]
pub struct FullQuiz {
    quiz: Quiz,
    lint_report: Option<LintReport>,
    description: Option<Description>,
    delivered: bool,
}

pub async fn full_quiz(
    State(st): AppStateRef,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<FullQuiz>> {
    require_admin(&st, &headers)?;
    let store = st.pipeline.store();
    let quiz: Quiz = store.get(&id)?;
    Ok(Json(FullQuiz {
        lint_report: store.get(&id).ok(),
        description: store.get(&quiz.description_id).ok(),
        delivered: st.pipeline.is_delivered(&quiz)?,
        quiz,
    }))
}

pub async fn list_reports(
    State(st): AppStateRef,
    headers: HeaderMap,
) -> ApiResult<Json<Vec<String>>> {
    require_admin(&st, &headers)?;
    let mut names = Vec::new();
    if let Ok(entries) = std::fs::read_dir(&st.config.reports_dir) {
        for e in entries.flatten() {
            if e.file_type().is_ok_and(|t| t.is_file()) {
                names.push(e.file_name().to_string_lossy().into_owned());
            }
        }
    }
    names.sort();
    Ok(Json(names))
}

pub async fn get_report(
    State(st): AppStateRef,
    headers: HeaderMap,
    Path(name): Path<String>,
) -> ApiResult<Response> {
    require_admin(&st, &headers)?;
    let safe = !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if !safe {
        return Err(ApiError::bad_request(format!("bad report name {name:?}")));
    }
    let path = st.config.reports_dir.join(&name);
    let body =
        std::fs::read(&path).map_err(|_| ApiError::not_found(format!("no report {name}")))?;
    let ctype = match path.extension().and_then(|e| e.to_str()) {
        Some("md") => "text/markdown; charset=utf-8",
        Some("csv") => "text/csv; charset=utf-8",
        Some("json") => "application/json",
        _ => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, ctype)], body).into_response())
}
