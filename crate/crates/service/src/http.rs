//! The HTTP service.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::api::{objective_for, solve_economy, solve_request, verify_request, SolveRequest, SolveResponse, VerifyRequest};
use crate::elicitation::{AnswerRequest, ElicitationSession, Question, SessionConfig};
use crate::error::ApiError;
use crate::store::SessionStore;
use rentdiv_core::doc::EconomyDocument;
use rentdiv_core::{ObjectiveKind, Rational};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<dyn SessionStore>,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| ApiError::bad_json(e.body_text()))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(store: Arc<dyn SessionStore>) -> Router {
    Router::new()
        .route("/v1/solve", post(solve_handler))
        .route("/v1/verify", post(verify_handler))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/question", get(question))
        .route("/v1/sessions/{id}/answer", post(answer))
        .route("/v1/sessions/{id}/solve", post(solve_session))
        .with_state(AppState { store })
}

async fn solve_handler(payload: Result<Json<SolveRequest>, JsonRejection>) -> ApiResult<SolveResponse> {
    let req = body(payload)?;
    blocking(move || solve_request(&req)).await.map(Json)
}

async fn verify_handler(payload: Result<Json<VerifyRequest>, JsonRejection>) -> ApiResult<crate::api::VerifyResponse> {
    let req = body(payload)?;
    blocking(move || verify_request(&req)).await.map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session: ElicitationSession,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<Question>,
}

impl SessionView {
    fn new(session: ElicitationSession) -> Self {
        SessionView { done: session.is_done(), question: session.next_question().ok(), session }
    }
}

async fn create_session(State(st): State<AppState>, payload: Result<Json<SessionConfig>, JsonRejection>) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let cfg = body(payload)?;
    let s = ElicitationSession::new(uuid::Uuid::new_v4().to_string(), cfg)?;
    st.store.insert(&s)?;
    Ok((StatusCode::CREATED, Json(SessionView::new(s))))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(SessionView::new(st.store.get(&id)?)))
}

async fn question(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Question> {
    Ok(Json(st.store.get(&id)?.next_question()?))
}

async fn answer(State(st): State<AppState>, Path(id): Path<String>, payload: Result<Json<AnswerRequest>, JsonRejection>) -> ApiResult<SessionView> {
    let req = body(payload)?;
    let s = st.store.update(&id, &mut |s| s.answer(&req.agent, req.answer.clone()))?;
    Ok(Json(SessionView::new(s)))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSolveRequest {
    #[serde(default)]
    pub objective: Option<ObjectiveKind>,
    #[serde(default)]
    pub transform: Option<std::collections::BTreeMap<String, (Rational, Rational)>>,
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSolveResponse {
    pub economy: EconomyDocument,
    pub solution: SolveResponse,
}

async fn solve_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    raw: Bytes,
) -> ApiResult<SessionSolveResponse> {
    let req: SessionSolveRequest = if raw.iter().all(u8::is_ascii_whitespace) {
        SessionSolveRequest::default()
    } else {
        serde_json::from_slice(&raw).map_err(ApiError::bad_json)?
    };
    let e = st.store.get(&id)?.build_economy()?;
    blocking(move || {
        let obj = objective_for(&e, req.objective.unwrap_or(ObjectiveKind::MaxminUtility), req.transform.as_ref())?;
        let solution = solve_economy(&e, &obj, req.trace)?;
        Ok(SessionSolveResponse { economy: EconomyDocument::from_economy(&e), solution })
    })
    .await
    .map(Json)
}
