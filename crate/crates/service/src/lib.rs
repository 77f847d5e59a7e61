//! JSON over HTTP front end for [`SessionRegistry`].

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dialsim::session::{ActionRequest, ActionResponse, SessionConfig, SessionCreated, SessionRegistry, SessionSnapshot};
use dialsim::synth::{movie_domain, SynthOptions};
use dialsim::{DomainSchema, Error, GoalDatabase, KnowledgeBase, TemplateEntry, TemplateSet, UserSimulator, Vocabulary};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub hint: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, hint: &str) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
                hint: hint.into(),
            },
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use StatusCode as S;
        let msg = e.to_string();
        match e {
            Error::SessionNotFound(_) => ApiError::new(S::NOT_FOUND, "session_not_found", msg, "create a new session"),
            Error::SessionClosed(_) | Error::EpisodeOver => {
                ApiError::new(S::CONFLICT, "session_closed", msg, "the dialogue has ended; start a new session")
            }
            Error::SessionBusy(_) => ApiError::new(
                S::CONFLICT,
                "session_busy",
                msg,
                "another action for this session is in progress; wait for its reply",
            ),
            Error::Parity { .. } => ApiError::new(S::CONFLICT, "turn_mismatch", msg, "refresh the session and retry"),
            Error::Unparsed(_) => ApiError::new(
                S::UNPROCESSABLE_ENTITY,
                "unparsed",
                msg,
                "rephrase, or switch to act mode and compose the act",
            ),
            Error::InvalidAct(_) | Error::UnknownSlot(_) | Error::UnknownIntent(_) | Error::NotInformable(_) => {
                ApiError::new(
                    S::UNPROCESSABLE_ENTITY,
                    "invalid_act",
                    msg,
                    "write acts as intent(slot=value;slot), using intents and slots from /api/schema",
                )
            }
            Error::Config(_) | Error::Noise(_) | Error::InvalidGoal(_) | Error::Schema(_) => {
                ApiError::new(S::BAD_REQUEST, "invalid_config", msg, "check the session settings")
            }
            _ => ApiError::new(S::INTERNAL_SERVER_ERROR, "internal", msg, ""),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text(), "send a JSON body")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

pub type AppState = Arc<SessionRegistry>;

pub fn router(registry: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/action", post(post_action))
        .route("/api/schema", get(get_schema))
        .route("/api/templates", get(get_templates))
        .with_state(registry)
}

async fn create_session(State(reg): State<AppState>, body: Bytes) -> ApiResult<SessionCreated> {
    // An empty body means all defaults.
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        SessionConfig::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| {
            ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string(), "check the session settings")
        })?
    };
    Ok(Json(reg.create(config)?))
}

async fn post_action(
    State(reg): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<ActionRequest>, JsonRejection>,
) -> ApiResult<ActionResponse> {
    let Json(request) = body?;
    Ok(Json(reg.post_action(&id, &request)?))
}

async fn get_session(State(reg): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionSnapshot> {
    Ok(Json(reg.get(&id)?))
}

async fn get_schema(State(reg): State<AppState>) -> Json<serde_json::Value> {
    let text = reg.simulator().schema().to_json();
    Json(serde_json::from_str(&text).expect("schema JSON"))
}

async fn get_templates(State(reg): State<AppState>) -> Json<Vec<TemplateEntry>> {
    Json(reg.templates().entries().to_vec())
}

/// Registry over the files in `dir` (`schema.json`, `movie_kb.json`,
/// `goals.json`, optional `templates.json`). Without a directory the
/// synthetic movie domain is generated in memory.
pub fn load_registry(dir: Option<&Path>) -> anyhow::Result<SessionRegistry> {
    let (kb, goals, templates) = match dir {
        Some(dir) => {
            let schema = Arc::new(DomainSchema::load(dir.join("schema.json"))?);
            let kb = Arc::new(KnowledgeBase::load(dir.join("movie_kb.json"), schema.clone())?);
            let goals = Arc::new(GoalDatabase::load(dir.join("goals.json"), &schema)?);
            let path = dir.join("templates.json");
            let templates = if path.exists() {
                TemplateSet::load(&path, &schema)?
            } else {
                TemplateSet::builtin(&schema)
            };
            (kb, goals, templates)
        }
        None => {
            let d = movie_domain(SynthOptions::default())?;
            let templates = d.templates.as_ref().clone();
            (d.kb, Arc::new(d.goals), templates)
        }
    };
    let lexicon = Arc::new(Vocabulary::from_kb_and_goals(&kb, &goals));
    let templates = Arc::new(templates.with_lexicon(lexicon));
    Ok(SessionRegistry::new(UserSimulator::new(kb, goals), templates))
}
