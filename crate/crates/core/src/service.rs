//! HTTP session service behind the matching UI.
//!
//! `POST /sessions` issues a seeded randomized schedule, `POST
//! /sessions/:id/matches` records one match, `POST /sessions/:id/finalize`
//! appends the session to the measurement CSV, `GET /sessions` lists
//! sessions. Bodies are JSON.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::archive::write_atomic;
use crate::colorspace::LuvColor;
use crate::error::Error;
use crate::thresholds::measurement::{DIRECTION_COUNT, REPETITIONS};
use crate::thresholds::{default_directions, write_csv_header, write_csv_rows, MeasurementRecord};

pub const MEASUREMENTS_FILE: &str = "measurements.csv";

/// Randomization ranges of the adjustment schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Range of the signed starting offset along the direction, ΔLuv.
    pub offset_range: [f64; 2],
    /// Candidate increments per adjustment step, ΔLuv.
    pub steps: Vec<f64>,
    /// Range of the delay between two adjustment steps, ms.
    pub switching_ms: [u64; 2],
    /// Pre-drawn adjustment steps per trial.
    pub steps_per_trial: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            offset_range: [1.0, 4.0],
            steps: vec![0.25, 0.5, 1.0],
            switching_ms: [120, 400],
            steps_per_trial: 48,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let [lo, hi] = self.offset_range;
        if !(0.0 <= lo && lo <= hi) {
            return Err(Error::Config("offset range must satisfy 0 <= lo <= hi".into()));
        }
        if self.steps.is_empty() || self.steps.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("steps must be positive and nonempty".into()));
        }
        if self.switching_ms[0] > self.switching_ms[1] {
            return Err(Error::Config("switching range must satisfy lo <= hi".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub direction_index: usize,
    pub repetition: u32,
    pub direction: [f64; 3],
    pub initial_offset: f64,
    pub increments: Vec<f64>,
    pub switching_ms: Vec<u64>,
}

/// Every direction and repetition once, in seeded random order.
pub fn make_schedule(seed: u64, cfg: &ScheduleConfig) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = default_directions();
    let mut order: Vec<(usize, u32)> = (1..=REPETITIONS)
        .flat_map(|rep| (0..DIRECTION_COUNT).map(move |d| (d, rep)))
        .collect();
    order.shuffle(&mut rng);
    order
        .into_iter()
        .map(|(d, rep)| {
            let magnitude = rng.gen_range(cfg.offset_range[0]..=cfg.offset_range[1]);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let increments = (0..cfg.steps_per_trial)
                .map(|_| *cfg.steps.choose(&mut rng).expect("nonempty steps"))
                .collect();
            let switching_ms = (0..cfg.steps_per_trial)
                .map(|_| rng.gen_range(cfg.switching_ms[0]..=cfg.switching_ms[1]))
                .collect();
            Trial {
                direction_index: d,
                repetition: rep,
                direction: directions[d],
                initial_offset: sign * magnitude,
                increments,
                switching_ms,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    /// Seed of sessions created without an explicit one; each session
    /// offsets it by its sequence number.
    pub seed: u64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            static_dir: None,
            schedule: ScheduleConfig::default(),
            seed: 0,
        }
    }

    pub fn measurements_path(&self) -> PathBuf {
        self.data_dir.join(MEASUREMENTS_FILE)
    }
}

#[derive(Debug)]
struct Session {
    id: String,
    observer_id: String,
    test_color: LuvColor,
    seed: u64,
    matches: BTreeMap<(usize, u32), (LuvColor, String)>,
    finalized: bool,
}

pub struct AppState {
    config: ServiceConfig,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    next: AtomicU64,
    csv: Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, Error> {
        config.schedule.validate()?;
        Ok(Arc::new(Self {
            config,
            sessions: Mutex::new(BTreeMap::new()),
            next: AtomicU64::new(1),
            csv: Mutex::new(()),
        }))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateSession {
    pub observer_id: String,
    pub test_color: LuvColor,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub seed: u64,
    pub schedule: Vec<Trial>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordMatch {
    pub direction_index: usize,
    pub repetition: u32,
    pub matched_color: LuvColor,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchRecorded {
    pub recorded: usize,
    pub expected: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Finalized {
    pub session_id: String,
    pub rows: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub observer_id: String,
    pub test_color: LuvColor,
    pub seed: u64,
    pub recorded: usize,
    pub finalized: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Invalid(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn session(state: &AppState, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
    state
        .sessions
        .lock()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("session {id}")).into())
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> ApiResult<SessionCreated> {
    if req.observer_id.trim().is_empty() {
        return Err(Error::Invalid("observer_id is empty".into()).into());
    }
    if !req.test_color.is_finite() || !(0.0..=100.0).contains(&req.test_color.l) {
        return Err(Error::Invalid("test color must be finite with L in [0, 100]".into()).into());
    }
    let n = state.next.fetch_add(1, Ordering::SeqCst);
    let seed = req.seed.unwrap_or_else(|| state.config.seed.wrapping_add(n));
    let id = format!("s{n:06}");
    let s = Session {
        id: id.clone(),
        observer_id: req.observer_id,
        test_color: req.test_color,
        seed,
        matches: BTreeMap::new(),
        finalized: false,
    };
    state.sessions.lock().await.insert(id.clone(), Arc::new(Mutex::new(s)));
    Ok(Json(SessionCreated {
        session_id: id,
        seed,
        schedule: make_schedule(seed, &state.config.schedule),
    }))
}

async fn record_match(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<RecordMatch>,
) -> ApiResult<MatchRecorded> {
    let s = session(&state, &id).await?;
    let mut s = s.lock().await;
    if s.finalized {
        return Err(Error::Conflict(format!("session {id} is finalized")).into());
    }
    if req.direction_index >= DIRECTION_COUNT {
        return Err(Error::Invalid(format!("direction index {} out of range", req.direction_index)).into());
    }
    if !(1..=REPETITIONS).contains(&req.repetition) {
        return Err(Error::Invalid(format!("repetition {} outside 1..={REPETITIONS}", req.repetition)).into());
    }
    if !req.matched_color.is_finite() {
        return Err(Error::Invalid("matched color is not finite".into()).into());
    }
    let ts = req
        .timestamp
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true));
    // idempotent on (direction, repetition) so uploads can be retried
    s.matches.insert((req.direction_index, req.repetition), (req.matched_color, ts));
    Ok(Json(MatchRecorded {
        recorded: s.matches.len(),
        expected: DIRECTION_COUNT * REPETITIONS as usize,
    }))
}

fn append_records(path: &Path, records: &[MeasurementRecord]) -> Result<(), Error> {
    let mut bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let mut b = Vec::new();
            write_csv_header(&mut b, &default_directions())?;
            b
        }
        Err(e) => return Err(e.into()),
    };
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        bytes.push(b'\n');
    }
    write_csv_rows(&mut bytes, records)?;
    write_atomic(path, &bytes)
}

async fn finalize(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Finalized> {
    let s = session(&state, &id).await?;
    let mut s = s.lock().await;
    if s.finalized {
        return Err(Error::Conflict(format!("session {id} is already finalized")).into());
    }
    if s.matches.is_empty() {
        return Err(Error::Invalid(format!("session {id} has no matches")).into());
    }
    let records: Vec<MeasurementRecord> = s
        .matches
        .iter()
        .map(|(&(d, rep), (color, ts))| MeasurementRecord {
            observer_id: s.observer_id.clone(),
            session_id: s.id.clone(),
            timestamp: ts.clone(),
            test_color: s.test_color,
            direction_index: d,
            repetition: rep,
            matched_color: *color,
        })
        .collect();
    let path = state.config.measurements_path();
    {
        let _guard = state.csv.lock().await;
        let recs = records.clone();
        tokio::task::spawn_blocking(move || append_records(&path, &recs))
            .await
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    }
    s.finalized = true;
    Ok(Json(Finalized {
        session_id: id,
        rows: records.len(),
    }))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<SessionSummary>> {
    let handles: Vec<_> = state.sessions.lock().await.values().cloned().collect();
    let mut out = Vec::with_capacity(handles.len());
    for h in handles {
        let s = h.lock().await;
        out.push(SessionSummary {
            session_id: s.id.clone(),
            observer_id: s.observer_id.clone(),
            test_color: s.test_color,
            seed: s.seed,
            recorded: s.matches.len(),
            finalized: s.finalized,
        });
    }
    Json(out)
}

pub fn router(state: Arc<AppState>) -> Router {
    let static_dir = state.config.static_dir.clone();
    let api = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/:id/matches", post(record_match))
        .route("/sessions/:id/finalize", post(finalize))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Runs until ctrl-c.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&config.data_dir)?;
    let probe = config.data_dir.join(".write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;
    let app = router(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
