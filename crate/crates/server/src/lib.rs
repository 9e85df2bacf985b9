//! HTTP boundary over [`SessionService`].
//!
//! Routes:
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/sessions` | | `{sessionId}` |
//! | PUT | `/sessions/{id}/scenario` | Scenario | Session |
//! | POST | `/sessions/{id}/generate` | | PlanSet + issues |
//! | POST | `/sessions/{id}/select` | `{ordinal}` | Session |
//! | POST | `/sessions/{id}/refine` | `{feedback}` | revised plan + issues |
//! | POST | `/sessions/{id}/finalize` | | FinalPlanRecord |
//! | GET | `/sessions/{id}` | | Session |
//! | GET | `/sessions/{id}/board?version=k` | | board (+ diff for k > 0) |
//! | GET | `/sessions/{id}/transcript` | | text |
//!
//! Failures carry an [`ApiError`] body.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderMap, StatusCode, header};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use reliefplan_core::{
    BoardTarget, BoardView, ErrorClass, FinalPlanRecord, GenerationView, RevisionView, Scenario, ServiceError,
    Session, SessionId, SessionService,
};

/// Error body returned with every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    /// A service error code, or one of `InvalidBody`, `InvalidQuery`,
    /// `Unauthorized`, `Internal`.
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
            details: None,
            status: status.as_u16(),
        }
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

pub fn status_for(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::InvalidInput => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorClass::Backend => StatusCode::BAD_GATEWAY,
        ErrorClass::Storage | ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let mut api = ApiError::new(status_for(e.class()), e.code(), e.to_string());
        api.details = e.details();
        api
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidBody", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{}: {}", self.code, self.message);
        }
        (self.status(), Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
struct AppState {
    service: Arc<SessionService>,
    token: Option<Arc<str>>,
}

/// Runs a service call on the blocking pool; the gateway client blocks.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionService) -> Result<T, ServiceError> + Send + 'static,
{
    let service = state.service.clone();
    match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(result) => Ok(Json(result?)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub session_id: SessionId,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectBody {
    pub ordinal: u8,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefineBody {
    pub feedback: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct BoardQuery {
    pub version: Option<usize>,
    pub candidate: Option<u8>,
}

async fn create(State(state): State<AppState>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(session) = blocking(&state, |s| s.create()).await?;
    Ok((StatusCode::CREATED, Json(Created { session_id: session.id })))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Session> {
    blocking(&state, move |s| s.get(&SessionId::new(id))).await
}

async fn put_scenario(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Scenario>, JsonRejection>,
) -> ApiResult<Session> {
    let Json(scenario) = body?;
    blocking(&state, move |s| s.submit_scenario(&SessionId::new(id), scenario)).await
}

async fn generate(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<GenerationView> {
    blocking(&state, move |s| {
        let session = s.generate(&SessionId::new(id))?;
        Ok(GenerationView::of(&session).expect("generated session has candidates"))
    })
    .await
}

async fn select(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SelectBody>, JsonRejection>,
) -> ApiResult<Session> {
    let Json(body) = body?;
    blocking(&state, move |s| s.select(&SessionId::new(id), body.ordinal)).await
}

async fn refine(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<RefineBody>, JsonRejection>,
) -> ApiResult<RevisionView> {
    let Json(body) = body?;
    blocking(&state, move |s| {
        let session = s.refine(&SessionId::new(id), &body.feedback)?;
        Ok(RevisionView::of(&session).expect("refined session has revisions"))
    })
    .await
}

async fn finalize(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<FinalPlanRecord> {
    blocking(&state, move |s| s.finalize(&SessionId::new(id))).await
}

async fn board(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<BoardQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<BoardView> {
    let Query(query) =
        query.map_err(|r| ApiError::new(StatusCode::BAD_REQUEST, "InvalidQuery", r.body_text()))?;
    let target = match (query.version, query.candidate) {
        (Some(_), Some(_)) => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "InvalidQuery",
                "pass either version or candidate, not both",
            ));
        }
        (Some(v), None) => BoardTarget::Version(v),
        (None, Some(n)) => BoardTarget::Candidate(n),
        (None, None) => BoardTarget::Latest,
    };
    blocking(&state, move |s| s.board(&SessionId::new(id), target)).await
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let Json(text) = blocking(&state, move |s| s.transcript(&SessionId::new(id))).await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn require_token(
    State(state): State<AppState>,
    headers: HeaderMap,
    request: Request,
    next: Next,
) -> Response {
    if let Some(token) = &state.token {
        let presented = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_ref()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(request).await
}

/// Builds the router. With `token` set, every request must carry
/// `Authorization: Bearer <token>`.
pub fn router(service: Arc<SessionService>, token: Option<String>) -> Router {
    let state = AppState {
        service,
        token: token.map(Arc::from),
    };
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/scenario", put(put_scenario))
        .route("/sessions/{id}/generate", post(generate))
        .route("/sessions/{id}/select", post(select))
        .route("/sessions/{id}/refine", post(refine))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/board", get(board))
        .route("/sessions/{id}/transcript", get(transcript))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until Ctrl-C on a fresh multi-threaded runtime.
pub fn serve_blocking(service: Arc<SessionService>, addr: SocketAddr, token: Option<String>) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(service, token))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
