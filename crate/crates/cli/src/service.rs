//! HTTP service: tutorial bundles plus live tracking sessions.
//!
//! Each session owns a simulated device. The viewer sends user intents,
//! the service applies them, snapshots the new screen and resolves the
//! current tutorial step from it.

use std::collections::{BTreeMap, HashMap};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use stepcast_core::device::{DeviceDef, DeviceInstance, Frame, ScrollDirection};
use stepcast_core::matcher::{highlight_signal, HighlightSignal, MatchState, Resolution};
use stepcast_core::parser::{token_set, TokenSet};
use stepcast_core::{ActionKind, Tutorial};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    /// The device refused the intent, e.g. a tap on an element not on screen.
    #[error("{0}")]
    Rejected(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Rejected(_) => StatusCode::CONFLICT,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
}

/// One user intent sent to a session's device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Intent {
    /// Tap the element with this id.
    Element(String),
    Scroll(ScrollDirection),
    OpenApp(String),
    /// Let this many ticks pass.
    Wait(u32),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    tutorial: String,
    #[serde(default)]
    device: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotEvent {
    session: String,
    element_texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActResponse {
    pub frame: Frame,
    pub current_step: usize,
    pub similarity: f64,
    pub matched: bool,
    pub flash: bool,
    pub highlight: HighlightSignal,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventResponse {
    pub current_step: usize,
    pub similarity: f64,
    pub matched: bool,
    pub flash: bool,
}

struct Session {
    tutorial: String,
    device: String,
    inst: DeviceInstance,
    matcher: MatchState,
    last: Resolution,
    highlight: HighlightSignal,
    events: usize,
}

impl Session {
    fn observe(&mut self, tokens: &TokenSet) -> (Resolution, HighlightSignal) {
        let prev = self.matcher.last_viewed();
        let res = self.matcher.resolve(tokens);
        let signal = highlight_signal(prev, res.current_step);
        self.last = res;
        self.highlight = signal;
        self.events += 1;
        (res, signal)
    }

    fn apply(&mut self, intent: &Intent) -> Result<(), ApiError> {
        let rejected = |e: stepcast_core::device::DeviceError| ApiError::Rejected(e.to_string());
        match intent {
            Intent::Element(id) => self.inst.act(id, ActionKind::Tap).map_err(rejected),
            Intent::Scroll(dir) => self.inst.scroll(*dir).map_err(rejected),
            Intent::OpenApp(app) => self.inst.open_app(app).map_err(rejected),
            Intent::Wait(n) => {
                (0..*n).for_each(|_| self.inst.wait());
                Ok(())
            }
        }
    }
}

/// Shared service state, independent of the HTTP layer.
pub struct AppState {
    bundle_dir: PathBuf,
    tutorials: BTreeMap<String, Arc<Tutorial>>,
    devices: BTreeMap<String, Arc<DeviceDef>>,
    threshold: f64,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
}

impl AppState {
    /// Loads every `<id>/tutorial.json` under `bundle_dir`.
    pub fn load(bundle_dir: &Path, devices: Vec<Arc<DeviceDef>>, threshold: f64) -> Result<Self, LoadError> {
        let read_err = |path: &Path, e: std::io::Error| LoadError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut tutorials = BTreeMap::new();
        let entries = std::fs::read_dir(bundle_dir).map_err(|e| read_err(bundle_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| read_err(bundle_dir, e))?;
            let path = entry.path().join("tutorial.json");
            if !path.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| read_err(&path, e))?;
            let tutorial: Tutorial = serde_json::from_str(&text).map_err(|e| LoadError::Json {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            tutorials.insert(tutorial.id.clone(), Arc::new(tutorial));
        }
        Ok(Self::new(bundle_dir.to_path_buf(), tutorials, devices, threshold))
    }

    pub fn new(
        bundle_dir: PathBuf,
        tutorials: BTreeMap<String, Arc<Tutorial>>,
        devices: Vec<Arc<DeviceDef>>,
        threshold: f64,
    ) -> Self {
        AppState {
            bundle_dir,
            tutorials,
            devices: devices.into_iter().map(|d| (d.id.clone(), d)).collect(),
            threshold,
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn tutorial_ids(&self) -> Vec<String> {
        self.tutorials.keys().cloned().collect()
    }

    fn tutorial(&self, id: &str) -> Result<&Arc<Tutorial>, ApiError> {
        self.tutorials
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown tutorial `{id}`")))
    }

    /// Device for a session: the requested one, else the only one, else the
    /// one named by the tutorial id's first component.
    fn pick_device(&self, tutorial: &str, requested: Option<&str>) -> Result<Arc<DeviceDef>, ApiError> {
        let found = match requested {
            Some(id) => self.devices.get(id),
            None if self.devices.len() == 1 => self.devices.values().next(),
            None => tutorial.split('.').next().and_then(|p| self.devices.get(p)),
        };
        found.cloned().ok_or_else(|| match requested {
            Some(id) => ApiError::NotFound(format!("unknown device `{id}`")),
            None => ApiError::BadRequest("several devices are loaded; name one".into()),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
    }

    pub async fn create_session(&self, tutorial: &str, device: Option<&str>) -> Result<serde_json::Value, ApiError> {
        let t = self.tutorial(tutorial)?.clone();
        let def = self.pick_device(tutorial, device)?;
        let inst = DeviceInstance::boot(def.clone(), None).map_err(|e| ApiError::Rejected(e.to_string()))?;
        let mut session = Session {
            tutorial: tutorial.to_string(),
            device: def.id.clone(),
            matcher: MatchState::new(t, self.threshold),
            last: Resolution {
                current_step: 0,
                similarity: 0.0,
                matched: false,
            },
            highlight: highlight_signal(0, 0),
            events: 0,
            inst,
        };
        let tokens = session.inst.snapshot().element_texts;
        let (res, signal) = session.observe(&tokens);
        let frame = session.inst.render();
        let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(json!({
            "session_id": id,
            "frame": frame,
            "current_step": res.current_step,
            "similarity": res.similarity,
            "flash": signal.flash,
        }))
    }

    pub async fn act(&self, session_id: &str, intent: &Intent) -> Result<ActResponse, ApiError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().await;
        s.apply(intent)?;
        let tokens = s.inst.snapshot().element_texts;
        let (res, signal) = s.observe(&tokens);
        Ok(ActResponse {
            frame: s.inst.render(),
            current_step: res.current_step,
            similarity: res.similarity,
            matched: res.matched,
            flash: signal.flash,
            highlight: signal,
        })
    }

    /// Matches an externally captured screen snapshot.
    pub async fn event(&self, session_id: &str, element_texts: &[String]) -> Result<EventResponse, ApiError> {
        let session = self.session(session_id)?;
        let mut s = session.lock().await;
        let tokens: TokenSet = element_texts.iter().flat_map(|t| token_set(t)).collect();
        let (res, signal) = s.observe(&tokens);
        Ok(EventResponse {
            current_step: res.current_step,
            similarity: res.similarity,
            matched: res.matched,
            flash: signal.flash,
        })
    }

    pub async fn session_state(&self, session_id: &str) -> Result<serde_json::Value, ApiError> {
        let session = self.session(session_id)?;
        let s = session.lock().await;
        Ok(json!({
            "session_id": session_id,
            "tutorial": s.tutorial,
            "device": s.device,
            "frame": s.inst.render(),
            "current_step": s.last.current_step,
            "similarity": s.last.similarity,
            "matched": s.last.matched,
            "highlight": s.highlight,
            "events": s.events,
        }))
    }

    /// Resolves an asset path inside the bundle directory, refusing any
    /// path that could leave it.
    fn asset_path(&self, rel: &str) -> Result<PathBuf, ApiError> {
        let rel = Path::new(rel);
        let safe = rel.components().all(|c| matches!(c, Component::Normal(_)));
        let not_found = || ApiError::NotFound(format!("unknown asset `{}`", rel.display()));
        if !safe {
            return Err(not_found());
        }
        let path = self.bundle_dir.join(rel);
        if path.is_file() {
            Ok(path)
        } else {
            Err(not_found())
        }
    }
}

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

type Shared = State<Arc<AppState>>;

async fn list_tutorials(State(state): Shared) -> Json<Vec<String>> {
    Json(state.tutorial_ids())
}

async fn get_tutorial(State(state): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<Tutorial>, ApiError> {
    Ok(Json(state.tutorial(&id)?.as_ref().clone()))
}

async fn get_asset(State(state): Shared, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    let file = state.asset_path(&path)?;
    let bytes = tokio::fs::read(&file)
        .await
        .map_err(|e| ApiError::NotFound(e.to_string()))?;
    let mime = if path.ends_with(".svg") {
        "image/svg+xml"
    } else if path.ends_with(".json") {
        "application/json"
    } else {
        "application/octet-stream"
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn post_session(State(state): Shared, bytes: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let req: NewSession = body(&bytes)?;
    Ok(Json(state.create_session(&req.tutorial, req.device.as_deref()).await?))
}

async fn post_act(
    State(state): Shared,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> Result<Json<ActResponse>, ApiError> {
    // Unknown sessions are a 404 even when the body is also bad.
    state.session(&id)?;
    let intent: Intent = body(&bytes)?;
    Ok(Json(state.act(&id, &intent).await?))
}

async fn get_session(State(state): Shared, UrlPath(id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    Ok(Json(state.session_state(&id).await?))
}

async fn post_event(State(state): Shared, bytes: Bytes) -> Result<Json<EventResponse>, ApiError> {
    let ev: SnapshotEvent = body(&bytes)?;
    Ok(Json(state.event(&ev.session, &ev.element_texts).await?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/tutorials", get(list_tutorials))
        .route("/tutorials/{id}", get(get_tutorial))
        .route("/assets/{*path}", get(get_asset))
        .route("/sessions", post(post_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/act", post(post_act))
        .route("/events", post(post_event))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
