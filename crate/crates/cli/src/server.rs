//! HTTP surface of the experiment. All JSON bodies carry
//! `schema_version`; errors come back as
//! `{"schema_version": 1, "error": {"code": "...", "message": "..."}}`.
//!
//! | method | path | body / reply |
//! |---|---|---|
//! | POST | `/api/v1/sessions` | `{"participant": 3}` → session summary |
//! | GET | `/api/v1/sessions` | all session summaries |
//! | GET | `/api/v1/sessions/{id}` | session summary |
//! | GET | `/api/v1/sessions/{id}/trial` | current trial with image URLs |
//! | POST | `/api/v1/sessions/{id}/responses` | `{"trial_id": 0, "response": {...}, "token": "..."}` → stored record |
//! | GET | `/api/v1/export[?session={id}]` | response table as CSV |
//! | GET | `/stimuli/{object}/{v}.png` | one stimulus |
//! | GET | `/stimuli/{object}/{left}-{right}.png` | a side-by-side pair |

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use meshfid_core::protocol::{
    PlanObject, ProtocolError, ResponsePayload, SessionStore, Stimulus, TrialView, SCHEMA_VERSION,
};
use meshfid_core::render::{compose_pair, GrayImage};
use meshfid_core::simplify::{Levels, Version};
use meshfid_core::stats::write_human_csv;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Milliseconds on the server clock.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

pub struct AppState {
    pub store: SessionStore,
    pub corpus: Vec<PlanObject>,
    pub levels: Levels,
    pub seed: u64,
    /// Pipeline output: `<object>/images/<version>.pgm`.
    pub images_dir: PathBuf,
    pub clock: Clock,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/sessions", get(list_sessions).post(create_session))
        .route("/api/v1/sessions/{id}", get(session_summary))
        .route("/api/v1/sessions/{id}/trial", get(next_trial))
        .route("/api/v1/sessions/{id}/responses", axum::routing::post(post_response))
        .route("/api/v1/export", get(export))
        .route("/stimuli/{object}/{file}", get(stimulus))
        .with_state(state)
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        let (status, code) = match &e {
            ProtocolError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ProtocolError::SessionComplete => (StatusCode::CONFLICT, "session_complete"),
            ProtocolError::OutOfOrder { .. } => (StatusCode::CONFLICT, "out_of_order"),
            ProtocolError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
            ProtocolError::NotServed(_) => (StatusCode::CONFLICT, "not_served"),
            ProtocolError::BeforeOnset { .. } => (StatusCode::TOO_EARLY, "before_onset"),
            ProtocolError::InvalidRating(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_rating"),
            ProtocolError::InvalidLatency(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_latency"),
            ProtocolError::PayloadMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "payload_mismatch"),
            ProtocolError::Corpus(_) => (StatusCode::UNPROCESSABLE_ENTITY, "corpus"),
            ProtocolError::Corrupt { .. } | ProtocolError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "status": "ok" }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub participant: u32,
    /// Defaults to the server seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn check_version(v: Option<u32>) -> ApiResult<()> {
    match v {
        Some(v) if v != SCHEMA_VERSION => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "schema_version",
            format!("schema version {v} is not supported; this server speaks {SCHEMA_VERSION}"),
        )),
        _ => Ok(()),
    }
}

async fn create_session(State(st): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<impl IntoResponse> {
    check_version(req.schema_version)?;
    let summary = st.store.create(req.participant, req.seed.unwrap_or(st.seed), st.levels, &st.corpus, (st.clock)())?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_sessions(State(st): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let sessions = st.store.ids().iter().map(|id| st.store.summary(id)).collect::<Result<Vec<_>, _>>()?;
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "sessions": sessions })))
}

async fn session_summary(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(st.store.summary(&id)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrialPayload {
    #[serde(flatten)]
    pub trial: TrialView,
    /// One URL per entry of `images`.
    pub image_urls: Vec<String>,
    /// Both members composed on one canvas, for pair layouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite_url: Option<String>,
}

fn trial_payload(view: TrialView) -> TrialPayload {
    let image_urls = view
        .images
        .iter()
        .map(|r| format!("/stimuli/{}/{}.png", r.object, r.version))
        .collect();
    let composite_url = match view.images.as_slice() {
        [l, r] => Some(format!("/stimuli/{}/{}-{}.png", l.object, l.version, r.version)),
        _ => None,
    };
    TrialPayload {
        trial: view,
        image_urls,
        composite_url,
    }
}

async fn next_trial(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let view = st.store.next_trial(&id, (st.clock)())?;
    Ok(Json(trial_payload(view)))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseRequest {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub trial_id: usize,
    pub response: ResponsePayload,
    #[serde(default)]
    pub token: Option<String>,
}

async fn post_response(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ResponseRequest>,
) -> ApiResult<impl IntoResponse> {
    check_version(req.schema_version)?;
    let now = (st.clock)();
    match st.store.record(&id, req.trial_id, req.response, req.token.clone(), now) {
        Ok(rec) => Ok((
            StatusCode::CREATED,
            Json(json!({ "schema_version": SCHEMA_VERSION, "record": rec, "session": st.store.summary(&id)? })),
        )),
        // a retried submission with the same token is not an error
        Err(ProtocolError::Duplicate(t)) => match st.store.response(&id, t)? {
            Some(rec) if req.token.is_some() && rec.token == req.token => Ok((
                StatusCode::OK,
                Json(json!({ "schema_version": SCHEMA_VERSION, "record": rec, "session": st.store.summary(&id)? })),
            )),
            _ => Err(ProtocolError::Duplicate(t).into()),
        },
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub session: Option<String>,
}

async fn export(State(st): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult<impl IntoResponse> {
    let rows = st.store.export(q.session.as_deref())?;
    let mut buf = Vec::new();
    write_human_csv(&mut buf, &rows)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "export", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], buf))
}

fn parse_stimulus_file(file: &str) -> Option<Stimulus> {
    let stem = file.strip_suffix(".png")?;
    match stem.split_once('-') {
        Some((l, r)) => Some(Stimulus::Pair {
            left: l.parse().ok()?,
            right: r.parse().ok()?,
        }),
        None => Some(Stimulus::Single { version: stem.parse().ok()? }),
    }
}

fn load_stimulus(st: &AppState, object: &str, v: Version) -> ApiResult<GrayImage> {
    let path = st.images_dir.join(object).join("images").join(format!("{v}.pgm"));
    GrayImage::read_pgm(&path).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "stimulus", format!("{}: {e}", path.display())))
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>, image::ImageError> {
    let raw = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .expect("buffer matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    raw.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

async fn stimulus(State(st): State<Arc<AppState>>, Path((object, file)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    if !st.corpus.iter().any(|o| o.name == object) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "stimulus", format!("unknown object `{object}`")));
    }
    let spec = parse_stimulus_file(&file)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "stimulus", format!("no stimulus `{file}`")))?;
    let img = match spec {
        Stimulus::Single { version } => load_stimulus(&st, &object, version)?,
        Stimulus::Pair { left, right } => compose_pair(&load_stimulus(&st, &object, left)?, &load_stimulus(&st, &object, right)?),
    };
    let png = encode_png(&img).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "stimulus", e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

pub async fn serve(addr: &str, state: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stimulus_file_names() {
        assert_eq!(parse_stimulus_file("q5.png"), Some(Stimulus::Single { version: Version::Q5 }));
        assert_eq!(
            parse_stimulus_file("s-v8.png"),
            Some(Stimulus::Pair {
                left: Version::S,
                right: Version::V8
            })
        );
        assert_eq!(parse_stimulus_file("x.png"), None);
        assert_eq!(parse_stimulus_file("s.pgm"), None);
    }
}
