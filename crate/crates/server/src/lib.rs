//! HTTP API over the arabiq pipeline: sessions, images, quiz sets, answers,
//! progress, and token-protected admin views.
//!
//! Learner-facing responses never carry a quiz's correct answer or the image
//! description. The answer is revealed only in the feedback to an attempt.

mod error;
mod handlers;
mod openapi;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use arabiq_core::{Pipeline, ProviderConfig};
use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub use error::ApiError;
pub use openapi::openapi_document;

pub const MAX_IMAGE_BYTES: usize = 10 * 1024 * 1024;
pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_ALLOWLIST: &[&str] = &["unsplash.com"];

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub providers: ProviderConfig,
    /// Hosts image URLs may come from. Subdomains are accepted.
    pub allowlist: Vec<String>,
    /// Admin endpoints answer 401 to everyone when unset.
    pub admin_token: Option<String>,
    pub reports_dir: PathBuf,
    pub max_image_bytes: usize,
}

impl ServerConfig {
    pub fn new(providers: ProviderConfig, reports_dir: PathBuf) -> Self {
        Self {
            providers,
            allowlist: DEFAULT_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
            admin_token: None,
            reports_dir,
            max_image_bytes: MAX_IMAGE_BYTES,
        }
    }

    /// Takes the admin token from `ARABIQ_ADMIN_TOKEN`.
    pub fn from_env(providers: ProviderConfig, reports_dir: PathBuf) -> Self {
        let mut c = Self::new(providers, reports_dir);
        c.admin_token = std::env::var("ARABIQ_ADMIN_TOKEN")
            .ok()
            .filter(|t| !t.is_empty());
        c
    }
}

/// `ARABIQ_PORT`, or 8080.
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var("ARABIQ_PORT") {
        Ok(p) => p
            .trim()
            .parse()
            .map_err(|_| format!("ARABIQ_PORT={p:?} is not a port number")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub(crate) struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub config: ServerConfig,
}

pub fn router(pipeline: Arc<Pipeline>, config: ServerConfig) -> Router {
    // multipart framing on top of the image itself
    let body_limit = config.max_image_bytes + 64 * 1024;
    let state = Arc::new(AppState { pipeline, config });
    Router::new()
        .route("/api/openapi.json", get(handlers::openapi))
        .route("/api/profiles", get(handlers::list_profiles))
        .route("/api/sessions", post(handlers::create_session))
        .route("/api/sessions/{id}/progress", get(handlers::progress))
        .route(
            "/api/images",
            post(handlers::add_image).get(handlers::list_images),
        )
        .route("/api/images/random", get(handlers::random_image))
        .route("/api/images/{id}", get(handlers::get_image))
        .route("/api/images/{id}/content", get(handlers::image_content))
        .route("/api/images/{id}/quizset", post(handlers::create_quiz_set))
        .route("/api/quizsets/{id}", get(handlers::get_quiz_set))
        .route("/api/quizsets/{id}/random", get(handlers::random_quiz))
        .route("/api/quizzes/{id}/answer", post(handlers::answer))
        .route("/api/quizzes/{id}/full", get(handlers::full_quiz))
        .route("/api/reports", get(handlers::list_reports))
        .route("/api/reports/{name}", get(handlers::get_report))
        .fallback(handlers::no_route)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

pub async fn serve(app: Router, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
