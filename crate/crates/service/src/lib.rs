//! HTTP service: upload DEXPI models, fetch their graphs and chat with them
//! over server-sent events.

mod api;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use pidrag::chat::{
    connect, new_session, ChatProvider, ChatSession, ProviderError, ProviderSpec, SharedSession, DEFAULT_SYSTEM_TEMPLATE,
    DEFAULT_TOKEN_BUDGET,
};
use pidrag::condense::{CondensationPolicy, CondensationReport};
use pidrag::eval::GraphLevel;
use pidrag::PropertyGraph;
use tower_http::services::ServeDir;

use store::{ModelRecord, SessionRecord, Store, StoreError};

pub use store::GraphStats;

pub const DEFAULT_MAX_UPLOAD: usize = 20 * 1024 * 1024;

pub type Connector = Arc<dyn Fn(&ProviderSpec) -> Result<Box<dyn ChatProvider>, ProviderError> + Send + Sync>;

#[derive(Clone)]
pub struct ServiceConfig {
    pub store: PathBuf,
    pub max_upload_bytes: usize,
    pub token_budget: usize,
    pub system_template: String,
    pub policy: CondensationPolicy,
    /// Required as `Authorization: Bearer <token>` on `/api` when set.
    pub auth_token: Option<String>,
    /// Built chat UI, served under `/`.
    pub ui_dir: Option<PathBuf>,
    /// Enables the `scripted` provider; model `m` replays `<dir>/m.json`.
    pub scripts_dir: Option<PathBuf>,
    pub connector: Connector,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            store: store.into(),
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            token_budget: DEFAULT_TOKEN_BUDGET,
            system_template: DEFAULT_SYSTEM_TEMPLATE.to_string(),
            policy: CondensationPolicy::default(),
            auth_token: None,
            ui_dir: None,
            scripts_dir: None,
            connector: Arc::new(connect),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
}

pub(crate) struct ModelEntry {
    pub record: ModelRecord,
    pub complete: PropertyGraph,
    pub high: PropertyGraph,
    pub report: CondensationReport,
}

impl ModelEntry {
    pub fn graph(&self, level: GraphLevel) -> &PropertyGraph {
        match level {
            GraphLevel::Complete => &self.complete,
            GraphLevel::High => &self.high,
        }
    }
}

pub(crate) struct SessionEntry {
    pub model_id: String,
    pub level: GraphLevel,
    pub provider: ProviderSpec,
    pub created: u64,
    pub shared: SharedSession,
    /// Copy of the last persisted state, readable while a completion holds
    /// `shared`.
    pub committed: Mutex<ChatSession>,
}

pub(crate) struct AppState {
    pub config: ServiceConfig,
    pub store: Store,
    pub models: RwLock<HashMap<String, Arc<ModelEntry>>>,
    pub sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
}

impl AppState {
    fn load(config: ServiceConfig) -> Result<Self, ServiceError> {
        let store = Store::open(&config.store)?;
        let mut models = HashMap::new();
        let mut sessions = HashMap::new();
        for stored in store.load_all()? {
            let entry = Arc::new(ModelEntry {
                record: stored.record,
                complete: stored.complete,
                high: stored.high,
                report: stored.report,
            });
            for rec in stored.sessions {
                match restore_session(&entry, rec, &config.system_template) {
                    Ok(s) => {
                        sessions.insert(s.shared.id().to_string(), Arc::new(s));
                    }
                    Err(e) => tracing::warn!("skipping stored session: {e}"),
                }
            }
            models.insert(entry.record.id.clone(), entry);
        }
        tracing::info!(models = models.len(), sessions = sessions.len(), "store loaded");
        Ok(AppState {
            config,
            store,
            models: RwLock::new(models),
            sessions: RwLock::new(sessions),
        })
    }
}

fn restore_session(model: &ModelEntry, rec: SessionRecord, template: &str) -> Result<SessionEntry, pidrag::chat::ChatError> {
    let mut session = new_session(model.graph(rec.level), template, rec.token_budget)?;
    session.id = rec.id;
    session.history = rec.history;
    Ok(SessionEntry {
        model_id: rec.model_id,
        level: rec.level,
        provider: rec.provider,
        created: rec.created,
        committed: Mutex::new(session.clone()),
        shared: SharedSession::new(session),
    })
}

/// The service router. Loads every model and session already in the store.
pub fn app(config: ServiceConfig) -> Result<Router, ServiceError> {
    let limit = config.max_upload_bytes;
    let ui = config.ui_dir.clone();
    let state = Arc::new(AppState::load(config)?);
    let api = Router::new()
        .route(
            "/models",
            post(api::upload_model)
                .get(api::list_models)
                .layer(DefaultBodyLimit::max(limit + 64 * 1024)),
        )
        .route("/models/{id}", get(api::get_model))
        .route("/models/{id}/graph", get(api::get_graph))
        .route("/models/{id}/condensation-report", get(api::get_report))
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/messages", post(api::post_message))
        .fallback(api::not_found)
        .layer(axum::middleware::from_fn_with_state(state.clone(), api::require_token))
        .with_state(state);
    let router = Router::new().nest("/api", api);
    Ok(match ui {
        Some(dir) => router.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => router,
    })
}

/// Binds `addr` and serves until the process stops.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let router = app(config)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    tracing::info!("listening on http://{}", listener.local_addr().unwrap_or(addr));
    axum::serve(listener, router).await.map_err(ServiceError::Serve)
}
