use std::convert::Infallible;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::Next;
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::channel::mpsc;
use futures::StreamExt;
use pidrag::chat::{ask, new_session, ChatMessage, ChatSession, ProviderError, ProviderSpec, SharedSession};
use pidrag::eval::GraphLevel;
use pidrag::io::{export, GraphFormat};
use pidrag::pipeline::{run_pipeline, PipelineError};
use pidrag::{export_graphml, PropertyGraph};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::store::{GraphStats, ModelRecord, SessionRecord};
use crate::{AppState, ModelEntry, SessionEntry};

type St = State<Arc<AppState>>;

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} {id} not found"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!("{e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub(crate) async fn require_token(State(state): St, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.auth_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such endpoint")
}

fn model(state: &AppState, id: &str) -> Result<Arc<ModelEntry>, ApiError> {
    let models = state.models.read().unwrap_or_else(|e| e.into_inner());
    models.get(id).cloned().ok_or_else(|| ApiError::not_found("model", id))
}

fn session(state: &AppState, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
    let sessions = state.sessions.read().unwrap_or_else(|e| e.into_inner());
    sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
}

fn parse_level(level: Option<&str>) -> Result<GraphLevel, ApiError> {
    let level = level.unwrap_or("high");
    GraphLevel::parse(level)
        .ok_or_else(|| ApiError::bad_request(format!("unknown level {level:?}; expected complete or high")))
}

#[derive(Serialize)]
pub(crate) struct ModelView {
    #[serde(flatten)]
    record: ModelRecord,
    node_reduction: f64,
    edge_reduction: f64,
    token_reduction: f64,
}

fn view(entry: &ModelEntry) -> ModelView {
    ModelView {
        record: entry.record.clone(),
        node_reduction: entry.report.node_reduction(),
        edge_reduction: entry.report.edge_reduction(),
        token_reduction: entry.report.token_reduction(),
    }
}

fn stats(graph: &PropertyGraph, tokens: usize) -> GraphStats {
    GraphStats {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        tokens,
    }
}

pub(crate) async fn upload_model(State(state): St, mut multipart: Multipart) -> Result<Response, ApiError> {
    let multipart_err = |e: axum::extract::multipart::MultipartError| ApiError::new(e.status(), e.body_text());
    let mut upload = None;
    while let Some(field) = multipart.next_field().await.map_err(multipart_err)? {
        if field.name() == Some("file") || field.file_name().is_some() {
            let name = field.file_name().unwrap_or("model.xml").to_string();
            let bytes = field.bytes().await.map_err(multipart_err)?;
            upload = Some((name, bytes));
            break;
        }
    }
    let (filename, bytes) = upload.ok_or_else(|| ApiError::bad_request("multipart field \"file\" is missing"))?;
    if bytes.is_empty() {
        return Err(ApiError::bad_request("uploaded file is empty"));
    }
    if bytes.len() > state.config.max_upload_bytes {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("upload of {} bytes exceeds the limit of {}", bytes.len(), state.config.max_upload_bytes),
        ));
    }
    let id = hex::encode(Sha256::digest(&bytes))[..16].to_string();
    if let Ok(existing) = model(&state, &id) {
        return Ok((StatusCode::OK, Json(view(&existing))).into_response());
    }

    let worker = state.clone();
    let entry = tokio::task::spawn_blocking(move || -> Result<ModelEntry, ApiError> {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("file is not UTF-8: {e}")))?;
        let out = run_pipeline(text, &worker.config.policy, Default::default()).map_err(|e| {
            let status = match e {
                PipelineError::Condense(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            };
            ApiError::new(status, e.to_string())
        })?;
        let complete_xml = export_graphml(&out.complete).map_err(ApiError::internal)?;
        let high_xml = export_graphml(&out.high).map_err(ApiError::internal)?;
        let record = ModelRecord {
            id,
            filename,
            created: now_millis(),
            complete: stats(&out.complete, out.report.tokens_before),
            high: stats(&out.high, out.report.tokens_after),
            diagnostics: out.diagnostics,
        };
        worker
            .store
            .save_model(&record, &bytes, &complete_xml, &high_xml, &out.report)
            .map_err(ApiError::internal)?;
        Ok(ModelEntry {
            record,
            complete: out.complete,
            high: out.high,
            report: out.report,
        })
    })
    .await
    .map_err(ApiError::internal)??;

    let entry = Arc::new(entry);
    let body = view(&entry);
    tracing::info!(id = %entry.record.id, file = %entry.record.filename, "model stored");
    state
        .models
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(entry.record.id.clone(), entry);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

pub(crate) async fn list_models(State(state): St) -> Json<Vec<ModelView>> {
    let models = state.models.read().unwrap_or_else(|e| e.into_inner());
    let mut out: Vec<ModelView> = models.values().map(|m| view(m)).collect();
    out.sort_by(|a, b| (a.record.created, &a.record.id).cmp(&(b.record.created, &b.record.id)));
    Json(out)
}

pub(crate) async fn get_model(State(state): St, Path(id): Path<String>) -> Result<Json<ModelView>, ApiError> {
    let entry = model(&state, &id)?;
    Ok(Json(view(&entry)))
}

#[derive(Deserialize)]
pub(crate) struct GraphQuery {
    level: Option<String>,
    format: Option<String>,
}

pub(crate) async fn get_graph(
    State(state): St,
    Path(id): Path<String>,
    Query(q): Query<GraphQuery>,
) -> Result<Response, ApiError> {
    let entry = model(&state, &id)?;
    let level = parse_level(q.level.as_deref())?;
    let format_name = q.format.as_deref().unwrap_or("json");
    let format = GraphFormat::parse(format_name)
        .ok_or_else(|| ApiError::bad_request(format!("unknown format {format_name:?}; expected json or graphml")))?;
    let body = export(entry.graph(level), format).map_err(ApiError::internal)?;
    let content_type = match format {
        GraphFormat::Json => "application/json",
        GraphFormat::Graphml => "application/graphml+xml",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

pub(crate) async fn get_report(State(state): St, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = model(&state, &id)?;
    Ok(Json(&entry.report).into_response())
}

#[derive(Deserialize)]
pub(crate) struct NewSession {
    model_id: String,
    level: Option<String>,
    provider: String,
    model: String,
}

#[derive(Serialize)]
pub(crate) struct SessionView {
    id: String,
    model_id: String,
    level: GraphLevel,
    provider: String,
    model: String,
    token_budget: usize,
    created: u64,
    busy: bool,
    history: Vec<ChatMessage>,
}

fn session_view(entry: &SessionEntry, session: &ChatSession, busy: bool) -> SessionView {
    SessionView {
        id: session.id.clone(),
        model_id: entry.model_id.clone(),
        level: entry.level,
        provider: entry.provider.provider_name.clone(),
        model: entry.provider.model_id.clone(),
        token_budget: session.token_budget,
        created: entry.created,
        busy,
        history: session.history.clone(),
    }
}

fn session_record(entry: &SessionEntry, session: &ChatSession) -> SessionRecord {
    SessionRecord {
        id: session.id.clone(),
        model_id: entry.model_id.clone(),
        level: entry.level,
        provider: entry.provider.clone(),
        token_budget: session.token_budget,
        created: entry.created,
        history: session.history.clone(),
    }
}

fn provider_spec(state: &AppState, provider: &str, model: &str) -> Result<ProviderSpec, ApiError> {
    if provider.eq_ignore_ascii_case("scripted") {
        let dir = state
            .config
            .scripts_dir
            .as_ref()
            .ok_or_else(|| ApiError::bad_request("the scripted provider is not enabled on this server"))?;
        if model.is_empty() || !model.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || model.starts_with('.') {
            return Err(ApiError::bad_request(format!("invalid script name {model:?}")));
        }
        return Ok(ProviderSpec::scripted(dir.join(format!("{model}.json")), model));
    }
    Ok(ProviderSpec::named(provider, model)?)
}

pub(crate) async fn create_session(State(state): St, Json(body): Json<NewSession>) -> Result<Response, ApiError> {
    let entry = model(&state, &body.model_id)?;
    let level = parse_level(body.level.as_deref())?;
    let spec = provider_spec(&state, &body.provider, &body.model)?;
    // Fails early on unknown providers, missing credentials and bad scripts.
    (state.config.connector)(&spec)?;
    let session = new_session(entry.graph(level), &state.config.system_template, state.config.token_budget)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let created = SessionEntry {
        model_id: entry.record.id.clone(),
        level,
        provider: spec,
        created: now_millis(),
        committed: Mutex::new(session.clone()),
        shared: SharedSession::new(session.clone()),
    };
    state
        .store
        .save_session(&session_record(&created, &session))
        .map_err(ApiError::internal)?;
    let body = session_view(&created, &session, false);
    state
        .sessions
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(session.id.clone(), Arc::new(created));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

pub(crate) async fn get_session(State(state): St, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let entry = session(&state, &id)?;
    let view = match entry.shared.try_begin() {
        Ok(guard) => session_view(&entry, &guard, false),
        // The in-flight exchange is not in the history yet, so the last
        // persisted copy is the current state.
        Err(_) => {
            let committed = entry.committed.lock().unwrap_or_else(|e| e.into_inner());
            session_view(&entry, &committed, true)
        }
    };
    Ok(Json(view))
}

#[derive(Deserialize)]
pub(crate) struct NewMessage {
    question: String,
}

fn event(value: serde_json::Value) -> Event {
    Event::default().data(value.to_string())
}

pub(crate) async fn post_message(
    State(state): St,
    Path(id): Path<String>,
    Json(body): Json<NewMessage>,
) -> Result<Response, ApiError> {
    let entry = session(&state, &id)?;
    if body.question.trim().is_empty() {
        return Err(ApiError::bad_request("question is empty"));
    }
    let mut guard = entry
        .shared
        .try_begin()
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
    let provider = (state.config.connector)(&entry.provider)?;
    let (tx, rx) = mpsc::unbounded::<Event>();
    tokio::spawn(async move {
        let chunks = tx.clone();
        let result = ask(&mut guard, &body.question, provider.as_ref(), |c| {
            let _ = chunks.unbounded_send(event(json!({"type": "token", "text": c})));
        })
        .await;
        let outcome = match result {
            Ok(_) => match state.store.save_session(&session_record(&entry, &guard)) {
                Ok(()) => {
                    *entry.committed.lock().unwrap_or_else(|e| e.into_inner()) = guard.clone();
                    Ok(())
                }
                Err(e) => {
                    tracing::error!("saving session {}: {e}", guard.id);
                    // Keep memory and disk in step by dropping the unsaved exchange.
                    guard.history = entry.committed.lock().unwrap_or_else(|e| e.into_inner()).history.clone();
                    Err(format!("answer could not be saved: {e}"))
                }
            },
            Err(e) => Err(e.to_string()),
        };
        drop(guard);
        let last = match outcome {
            Ok(()) => json!({"type": "done"}),
            Err(message) => json!({"type": "error", "message": message}),
        };
        let _ = tx.unbounded_send(event(last));
    });
    Ok(Sse::new(rx.map(Ok::<_, Infallible>)).into_response())
}
