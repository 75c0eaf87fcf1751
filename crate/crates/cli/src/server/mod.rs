//! HTTP service over sessions, validation, generation and KB editing.

mod store;

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use mbms_core::canon;
use mbms_core::codegen::TemplateSet;
use mbms_core::dsl::{parse_requirements, FormalRequirement};
use mbms_core::engine::{EngineOutcome, Session, SessionError, SessionStatus};
use mbms_core::pipeline::{self, stamped_description, PipelineError};
use mbms_core::{Catalog, ExportSelector, KbError, KnowledgeBase, ProductionRule, Symbol};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

pub use store::{fresh_session_id, SessionStore, StoreFull};

use crate::files;

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_idle_timeout() -> u64 {
    1800
}

fn default_max_sessions() -> usize {
    256
}

/// Service settings, read from TOML. Relative paths are resolved against
/// the config file's directory.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    /// KB archive; loaded at startup and rewritten on every KB mutation.
    pub kb: PathBuf,
    /// Catalog document merged over the built-in units.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default = "default_idle_timeout")]
    pub session_idle_timeout_secs: u64,
    #[serde(default = "default_max_sessions")]
    pub max_sessions: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{0} must be greater than zero")]
    NotPositive(&'static str),
}

impl ServiceConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: ServiceConfig = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: base.to_path_buf(),
            source,
        })?;
        if config.session_idle_timeout_secs == 0 {
            return Err(ConfigError::NotPositive("session_idle_timeout_secs"));
        }
        if config.max_sessions == 0 {
            return Err(ConfigError::NotPositive("max_sessions"));
        }
        config.kb = base.join(&config.kb);
        config.catalog = config.catalog.map(|c| base.join(c));
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// Shared service state.
pub struct AppState {
    sessions: SessionStore,
    kb: RwLock<Arc<KnowledgeBase>>,
    /// Serializes KB mutations, including their persistence.
    kb_writer: tokio::sync::Mutex<()>,
    kb_path: Option<PathBuf>,
    catalog: Arc<Catalog>,
    templates: TemplateSet,
}

impl AppState {
    /// With `kb_path`, every KB mutation is written there before it is
    /// acknowledged.
    pub fn new(
        kb: KnowledgeBase,
        catalog: Catalog,
        kb_path: Option<PathBuf>,
        idle_timeout: Duration,
        max_sessions: usize,
    ) -> Self {
        Self {
            sessions: SessionStore::new(idle_timeout, max_sessions),
            kb: RwLock::new(Arc::new(kb)),
            kb_writer: tokio::sync::Mutex::new(()),
            kb_path,
            catalog: Arc::new(catalog),
            templates: TemplateSet::default(),
        }
    }

    pub fn from_config(config: &ServiceConfig) -> Result<Self, files::LoadError> {
        let kb = files::load_kb(Some(&config.kb))?;
        let catalog = files::load_catalog(config.catalog.as_deref())?;
        Ok(Self::new(
            kb,
            catalog,
            Some(config.kb.clone()),
            Duration::from_secs(config.session_idle_timeout_secs),
            config.max_sessions,
        ))
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    /// Current KB snapshot.
    pub fn kb(&self) -> Arc<KnowledgeBase> {
        Arc::clone(&self.kb.read().expect("kb lock"))
    }

    /// Applies `change` under the writer lock, persists the result and then
    /// publishes it. Readers keep the old snapshot until publication.
    async fn mutate_kb<F>(&self, change: F) -> Result<Arc<KnowledgeBase>, ApiError>
    where
        F: FnOnce(&KnowledgeBase) -> Result<KnowledgeBase, KbError>,
    {
        let _guard = self.kb_writer.lock().await;
        let next = Arc::new(change(&self.kb())?);
        if let Some(path) = &self.kb_path {
            files::write_atomic(path, &next.to_archive_bytes())
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "persistence_failed", e))?;
        }
        *self.kb.write().expect("kb lock") = Arc::clone(&next);
        Ok(next)
    }
}

/// `{error, detail}` with a status code.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Json,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl ToString) -> Self {
        Self {
            status,
            body: json!({"error": code, "detail": detail.to_string()}),
        }
    }

    fn bad_request(code: &str, detail: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, detail)
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, &format!("unknown_{what}"), format!("no {what} `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        canonical(self.status, &self.body)
    }
}

pub fn kb_error_code(e: &KbError) -> &'static str {
    match e {
        KbError::DuplicateRuleId(_) => "duplicate_rule_id",
        KbError::DuplicateFrame(_) => "duplicate_frame",
        KbError::UnboundActionVariable(_) => "unbound_action_variable",
        KbError::MalformedRule(_) => "malformed_rule",
        KbError::MalformedFrame { .. } => "malformed_frame",
        KbError::UnknownRule(_) => "unknown_rule",
        KbError::UnknownUnit(_) => "unknown_unit",
        KbError::Frame(_) => "frame_error",
        KbError::EmptySelection => "empty_selection",
        KbError::UnsupportedSchema { .. } => "unsupported_schema",
        KbError::Format(_) => "malformed_archive",
    }
}

impl From<KbError> for ApiError {
    fn from(e: KbError) -> Self {
        let status = match e {
            KbError::DuplicateRuleId(_) | KbError::DuplicateFrame(_) => StatusCode::CONFLICT,
            KbError::UnknownRule(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, kb_error_code(&e), e)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::DuplicateRequirementId(_) => "duplicate_requirement_id",
            _ => "wrong_session_state",
        };
        ApiError::new(StatusCode::CONFLICT, code, e)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Session(s) => s.into(),
            PipelineError::Validation(v) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "validation_error", v),
            PipelineError::Codegen(c) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "codegen_error", c),
        }
    }
}

fn canonical<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = canon::to_bytes(body).expect("documents serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn ok<T: Serialize>(body: &T) -> Response {
    canonical(StatusCode::OK, body)
}

/// Reads a canonical-format request body.
fn body<T: serde::de::DeserializeOwned>(bytes: &[u8], code: &str) -> Result<T, ApiError> {
    canon::from_slice(bytes).map_err(|e| ApiError::bad_request(code, e))
}

type AppResult = Result<Response, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/requirements", post(submit_requirement))
        .route("/sessions/{id}/retry", post(retry))
        .route("/sessions/{id}/scheme", get(scheme))
        .route("/sessions/{id}/validation", get(validation))
        .route("/sessions/{id}/description", get(description))
        .route("/sessions/{id}/generate", post(generate))
        .route("/kb/rules", get(list_rules).post(add_rule))
        .route("/kb/rules/{id}/links", post(link_rule))
        .route("/kb/export", post(export_kb))
        .route("/catalog/units", get(catalog_units))
        .with_state(state)
}

fn lookup(state: &AppState, id: &str) -> Result<store::SharedSession, ApiError> {
    state.sessions.get(id).ok_or_else(|| ApiError::not_found("session", id))
}

fn status_doc(status: &SessionStatus) -> serde_json::Map<String, Json> {
    match serde_json::to_value(status).expect("status serializes") {
        Json::Object(map) => map,
        _ => unreachable!("status is a tagged object"),
    }
}

fn summary(session: &Session) -> Json {
    let mut doc = status_doc(session.status());
    doc.insert("session_id".into(), json!(session.id()));
    doc.insert("kb_version".into(), json!(session.kb().version()));
    doc.insert("requirements".into(), json!(session.requirement_log().len()));
    doc.insert("firings".into(), json!(session.trace().len()));
    doc.insert("instances".into(), json!(session.scheme().instances.len()));
    Json::Object(doc)
}

fn outcome_doc(outcome: &EngineOutcome, req_id: Option<&Symbol>) -> Json {
    let mut doc = status_doc(&outcome.status);
    doc.insert("firings".into(), serde_json::to_value(&outcome.firings).expect("firings serialize"));
    if let Some(r) = req_id {
        doc.insert("submitted".into(), json!(r));
    }
    Json::Object(doc)
}

async fn create_session(State(state): Shared) -> AppResult {
    let kb = state.kb();
    let catalog = Arc::clone(&state.catalog);
    let id = state
        .sessions
        .insert(|id| Session::new(kb, catalog).with_id(id))
        .map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "session_limit", e))?;
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    Ok(canonical(StatusCode::CREATED, &summary(&session)))
}

async fn session_summary(State(state): Shared, UrlPath(id): UrlPath<String>) -> AppResult {
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    Ok(ok(&summary(&session)))
}

/// Accepts one statement in the DSL or a formal requirement document.
async fn submit_requirement(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> AppResult {
    let session = lookup(&state, &id)?;
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"))
        || bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
    let mut session = session.lock().await;
    let before = session.requirement_log().len();
    let outcome = if is_json {
        let req: FormalRequirement = body(&bytes, "malformed_requirement")?;
        session.submit_requirement(req)?
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| ApiError::bad_request("parse_error", "body is not UTF-8"))?;
        let raws = parse_requirements(text).map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            body: crate::cli::parse_error_doc("body", &e),
        })?;
        let [raw] = raws.as_slice() else {
            return Err(ApiError::bad_request(
                "parse_error",
                format!("expected exactly one statement, found {}", raws.len()),
            ));
        };
        session.submit_statement(raw)?
    };
    let req_id = session.requirement_log().get(before).map(|r| r.req_id.clone());
    Ok(ok(&outcome_doc(&outcome, req_id.as_ref())))
}

/// Re-runs the stalled requirement against the current KB snapshot.
async fn retry(State(state): Shared, UrlPath(id): UrlPath<String>) -> AppResult {
    let session = lookup(&state, &id)?;
    let mut session = session.lock().await;
    let outcome = session.retry(state.kb())?;
    Ok(ok(&outcome_doc(&outcome, None)))
}

async fn scheme(State(state): Shared, UrlPath(id): UrlPath<String>) -> AppResult {
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    Ok(ok(session.scheme()))
}

async fn validation(State(state): Shared, UrlPath(id): UrlPath<String>) -> AppResult {
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    let (_, report) = stamped_description(&session)?;
    Ok(ok(&report))
}

async fn description(State(state): Shared, UrlPath(id): UrlPath<String>) -> AppResult {
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    let (pd, _) = stamped_description(&session)?;
    Ok(ok(&pd))
}

#[derive(Debug, Default, Deserialize)]
struct GenerateQuery {
    #[serde(default)]
    force: bool,
}

/// The scaffold as a zip archive.
async fn generate(State(state): Shared, UrlPath(id): UrlPath<String>, Query(q): Query<GenerateQuery>) -> AppResult {
    let session = lookup(&state, &id)?;
    let session = session.lock().await;
    let (pd, report) = stamped_description(&session)?;
    if !report.passed && !q.force {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            body: json!({"error": "validation_failed", "detail": format!("{} mistakes", report.mistakes.len()), "report": report}),
        });
    }
    let files = pipeline::generate(pd, q.force, &state.templates).map_err(PipelineError::from)?;
    let zip = files::zip_fileset(&files);
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, "application/zip".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"mbms-{id}.zip\"")),
        ],
        zip,
    )
        .into_response())
}

async fn list_rules(State(state): Shared) -> AppResult {
    let kb = state.kb();
    Ok(ok(&json!({"kb_version": kb.version(), "rules": kb.rules()})))
}

async fn add_rule(State(state): Shared, bytes: Bytes) -> AppResult {
    let rule: ProductionRule = body(&bytes, "malformed_rule")?;
    let id = rule.id.clone();
    let kb = state.mutate_kb(|kb| kb.add_rule(rule)).await?;
    Ok(canonical(StatusCode::CREATED, &json!({"rule": id, "kb_version": kb.version()})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkRequest {
    units: BTreeSet<Symbol>,
}

async fn link_rule(State(state): Shared, UrlPath(id): UrlPath<String>, bytes: Bytes) -> AppResult {
    let rule = Symbol::new(id.as_str()).map_err(|_| ApiError::not_found("rule", &id))?;
    let req: LinkRequest = body(&bytes, "malformed_links")?;
    let catalog = Arc::clone(&state.catalog);
    let kb = state
        .mutate_kb(|kb| kb.link_rule_to_units(&rule, &req.units, &catalog))
        .await?;
    let linked = &kb.rule(&rule).expect("rule was just linked").linked_units;
    Ok(ok(&json!({"rule": rule, "linked_units": linked, "kb_version": kb.version()})))
}

async fn export_kb(State(state): Shared, bytes: Bytes) -> AppResult {
    let selector: ExportSelector = body(&bytes, "malformed_selector")?;
    let archive = state.kb().export_subset(&selector)?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], archive.to_bytes()).into_response())
}

async fn catalog_units(State(state): Shared) -> AppResult {
    Ok(ok(&json!({"units": state.catalog.units()})))
}

/// Binds, serves until interrupted, and evicts idle sessions meanwhile.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = Arc::new(AppState::from_config(&config)?);
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| ServeError::Bind(config.bind, e))?;
    let sweeper = Arc::clone(&state);
    let period = Duration::from_secs(config.session_idle_timeout_secs.clamp(1, 60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.sessions.evict_idle();
        }
    });
    eprintln!("listening on {}", config.bind);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServeError::Io)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Load(#[from] files::LoadError),
    #[error("cannot bind {0}: {1}")]
    Bind(SocketAddr, std::io::Error),
    #[error(transparent)]
    Io(std::io::Error),
}

pub fn serve_blocking(config: ServiceConfig) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(ServeError::Io)?
        .block_on(serve(config))
}
