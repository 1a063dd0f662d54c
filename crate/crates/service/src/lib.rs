//! Session-scoped HTTP API under `/v1`.
//!
//! State is in memory. Long fits (estimated above the async threshold) answer
//! 202 with a poll token; everything else answers within the request.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cste_core::curve::CsteCurve;
use cste_core::data::{parse_covariates, parse_csv, Dataset, NormalizationReport, Schema};
use cste_core::error::CsteError;
use cste_core::export::{curve_csv, curve_json};
use cste_core::itr::RegionReport;
use cste_core::pipeline::{self, BinaryRequest, FitArtifact, SurvivalRequest};

/// Runtime configuration, read from the environment.
#[derive(Debug, Clone)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub max_upload_bytes: usize,
    pub default_n_boot: usize,
    /// Fits estimated to take longer than this run in the background.
    pub async_threshold_secs: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            max_upload_bytes: 50 * 1024 * 1024,
            default_n_boot: 1000,
            async_threshold_secs: 10.0,
        }
    }
}

impl Config {
    /// `CSTE_BIND`, `CSTE_PORT`, `CSTE_MAX_UPLOAD_BYTES`, `CSTE_DEFAULT_N_BOOT`,
    /// `CSTE_ASYNC_THRESHOLD_SECS`; unset variables keep their defaults.
    pub fn from_env() -> Result<Self, String> {
        fn var<T: std::str::FromStr>(name: &str, default: T) -> Result<T, String> {
            match std::env::var(name) {
                Ok(v) => v.parse().map_err(|_| format!("{name}: cannot parse {v:?}")),
                Err(_) => Ok(default),
            }
        }
        let d = Config::default();
        Ok(Config {
            bind: var("CSTE_BIND", d.bind)?,
            port: var("CSTE_PORT", d.port)?,
            max_upload_bytes: var("CSTE_MAX_UPLOAD_BYTES", d.max_upload_bytes)?,
            default_n_boot: var("CSTE_DEFAULT_N_BOOT", d.default_n_boot)?,
            async_threshold_secs: var("CSTE_ASYNC_THRESHOLD_SECS", d.async_threshold_secs)?,
        })
    }
}

struct StoredDataset {
    dataset: Dataset,
    normalization: Option<NormalizationReport>,
}

struct StoredFit {
    artifact: FitArtifact,
    curve: CsteCurve,
    regions: RegionReport,
}

#[derive(Clone)]
enum Job {
    Pending,
    Done(StatusCode, Value),
}

struct Session {
    datasets: HashMap<String, Arc<StoredDataset>>,
    fits: HashMap<String, Arc<StoredFit>>,
    in_flight: HashSet<String>,
    jobs: HashMap<String, Job>,
    #[allow(dead_code)]
    created: SystemTime,
    last_used: SystemTime,
}

impl Session {
    fn new() -> Self {
        let now = SystemTime::now();
        Session {
            datasets: HashMap::new(),
            fits: HashMap::new(),
            in_flight: HashSet::new(),
            jobs: HashMap::new(),
            created: now,
            last_used: now,
        }
    }
}

type SessionRef = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    config: Arc<Config>,
    sessions: Arc<RwLock<HashMap<String, SessionRef>>>,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        AppState {
            config: Arc::new(config),
            sessions: Arc::new(RwLock::new(HashMap::new())),
        }
    }

    fn session(&self, id: &str) -> Result<SessionRef, ApiError> {
        let s = self
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id}")))?;
        s.lock().expect("session poisoned").last_used = SystemTime::now();
        Ok(s)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
    fn not_found(m: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, m)
    }
    fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }
    fn invalid(m: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, m)
    }
}

/// User errors are 422, solver failures 409.
impl From<CsteError> for ApiError {
    fn from(e: CsteError) -> Self {
        let status = if e.is_user_error() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::CONFLICT
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/datasets", post(upload_dataset))
        .route("/v1/sessions/{id}/fits/binary", post(fit_binary))
        .route("/v1/sessions/{id}/fits/survival", post(fit_survival))
        .route("/v1/sessions/{id}/predictions", post(predictions))
        .route("/v1/sessions/{id}/curves/{name}", get(curve))
        .route("/v1/sessions/{id}/jobs/{token}", get(job))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    if !body.iter().all(u8::is_ascii_whitespace) {
        match serde_json::from_slice::<Value>(&body) {
            Ok(Value::Object(_)) => {}
            Ok(_) => return Err(ApiError::bad_request("session body must be a JSON object")),
            Err(e) => return Err(ApiError::bad_request(format!("malformed JSON: {e}"))),
        }
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    state
        .sessions
        .write()
        .expect("session map poisoned")
        .insert(id.clone(), Arc::new(Mutex::new(Session::new())));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response())
}

async fn upload_dataset(
    State(state): State<AppState>,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let (mut name, mut schema, mut file, mut normalize) = (None, None, None, false);
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("malformed multipart body: {e}")))?
    {
        let field_name = field.name().unwrap_or_default().to_string();
        let text = field
            .text()
            .await
            .map_err(|e| ApiError::bad_request(format!("field {field_name}: {e}")))?;
        match field_name.as_str() {
            "name" => name = Some(text.trim().to_string()),
            "schema" => {
                let s: Schema = serde_json::from_str(&text)
                    .map_err(|e| ApiError::invalid(format!("invalid schema: {e}")))?;
                schema = Some(s);
            }
            "file" => file = Some(text),
            "normalize" => {
                normalize = match text.trim() {
                    "true" | "1" => true,
                    "false" | "0" | "" => false,
                    other => return Err(ApiError::invalid(format!("normalize must be true or false, got {other:?}"))),
                }
            }
            other => return Err(ApiError::invalid(format!("unexpected field {other:?}"))),
        }
    }
    let name = name
        .filter(|n| !n.is_empty())
        .ok_or_else(|| ApiError::invalid("missing field \"name\""))?;
    let schema = schema.ok_or_else(|| ApiError::invalid("missing field \"schema\""))?;
    let file = file.ok_or_else(|| ApiError::invalid("missing field \"file\""))?;
    if session.lock().expect("session poisoned").datasets.contains_key(&name) {
        return Err(ApiError::conflict(format!("dataset {name:?} already exists")));
    }

    let parsed = tokio::task::spawn_blocking(move || -> Result<StoredDataset, ApiError> {
        let dataset = parse_csv(&file, &schema)?;
        match dataset {
            Dataset::Binary(d) if normalize => {
                let (d, r) = d.normalized()?;
                Ok(StoredDataset { dataset: Dataset::Binary(d), normalization: Some(r) })
            }
            Dataset::Survival(_) if normalize => Err(ApiError::invalid(
                "normalization applies to binary datasets only",
            )),
            dataset => Ok(StoredDataset { dataset, normalization: None }),
        }
    })
    .await
    .expect("parse task panicked")?;

    let summary = dataset_summary(&name, &parsed);
    let mut s = session.lock().expect("session poisoned");
    if s.datasets.contains_key(&name) {
        return Err(ApiError::conflict(format!("dataset {name:?} already exists")));
    }
    s.datasets.insert(name, Arc::new(parsed));
    Ok(Json(summary).into_response())
}

fn dataset_summary(name: &str, d: &StoredDataset) -> Value {
    let schema = Schema::of(&d.dataset);
    match &d.dataset {
        Dataset::Binary(b) => json!({
            "name": name,
            "kind": "binary",
            "n": b.n(),
            "covariates": b.p(),
            "roles": schema,
            "normalized": d.normalization.is_some(),
        }),
        Dataset::Survival(s) => json!({
            "name": name,
            "kind": "survival",
            "n": s.n(),
            "arms": s.k(),
            "treatment_labels": s.treatment_labels,
            "events": s.status.iter().filter(|&&e| e != 0).count(),
            "roles": schema,
            "normalized": false,
        }),
    }
}

/// Body of a fit request: target names plus the pipeline parameters.
#[derive(Deserialize)]
struct FitTarget {
    dataset: String,
    /// Name under which the fit and its curve are stored; defaults to the dataset name.
    name: Option<String>,
}

fn parse_body(body: &Bytes) -> ApiResult<Value> {
    let body: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    match serde_json::from_slice::<Value>(body) {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => Err(ApiError::bad_request("request body must be a JSON object")),
        Err(e) => Err(ApiError::bad_request(format!("malformed JSON: {e}"))),
    }
}

fn decode<T: for<'de> Deserialize<'de>>(v: &Value) -> ApiResult<T> {
    serde_json::from_value(v.clone()).map_err(|e| ApiError::invalid(format!("invalid parameters: {e}")))
}

/// Rough wall-clock estimate used to decide between answering inline and 202.
fn binary_seconds(n: usize, p: usize, req: &BinaryRequest) -> f64 {
    let fits = req.lambda_grid.as_ref().map_or(1, Vec::len) as f64;
    let fit = fits * n as f64 * (p as f64 + 4.0) * 4e-5;
    let band = req.grid_size as f64 * req.n_boot as f64 * n as f64 * 2e-9;
    fit + band
}

fn survival_seconds(n: usize, req: &SurvivalRequest) -> f64 {
    req.grid_size as f64 * n as f64 * (n as f64 * 5e-7 + req.n_resample as f64 * 1e-8)
}

struct Outcome {
    artifact: FitArtifact,
    curve: CsteCurve,
    regions: RegionReport,
}

fn fit_response(name: &str, dataset: &str, o: &Outcome) -> Value {
    json!({
        "name": name,
        "dataset": dataset,
        "fit": o.artifact,
        "curve": o.curve,
        "regions": o.regions,
        "band_contains_estimate": o.curve.contains_estimate(),
    })
}

/// Runs `work` for fit `name`, inline or as a background job. The name is
/// reserved for the duration so a concurrent fit of the same name gets 409.
async fn run_fit<F>(
    state: &AppState,
    session_id: &str,
    session: SessionRef,
    name: String,
    dataset: String,
    estimate_secs: f64,
    work: F,
) -> ApiResult<Response>
where
    F: FnOnce() -> Result<Outcome, CsteError> + Send + 'static,
{
    {
        let mut s = session.lock().expect("session poisoned");
        if !s.in_flight.insert(name.clone()) {
            return Err(ApiError::conflict(format!("a fit named {name:?} is already running")));
        }
    }
    let finish = {
        let session = session.clone();
        let name = name.clone();
        move |result: Result<Outcome, CsteError>| -> (StatusCode, Value) {
            let mut s = session.lock().expect("session poisoned");
            s.in_flight.remove(&name);
            match result {
                Ok(o) => {
                    let body = fit_response(&name, &dataset, &o);
                    s.fits.insert(
                        name,
                        Arc::new(StoredFit { artifact: o.artifact, curve: o.curve, regions: o.regions }),
                    );
                    (StatusCode::OK, body)
                }
                Err(e) => {
                    let e = ApiError::from(e);
                    (e.status, json!({ "error": e.message }))
                }
            }
        }
    };

    if estimate_secs <= state.config.async_threshold_secs {
        let result = tokio::task::spawn_blocking(work).await;
        let (status, body) = match result {
            Ok(r) => finish(r),
            Err(_) => finish(Err(CsteError::Numerical("fit task panicked".into()))),
        };
        return Ok((status, Json(body)).into_response());
    }

    let token = uuid::Uuid::new_v4().simple().to_string();
    session
        .lock()
        .expect("session poisoned")
        .jobs
        .insert(token.clone(), Job::Pending);
    let job_session = session.clone();
    let job_token = token.clone();
    tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(work).await;
        let (status, body) = match result {
            Ok(r) => finish(r),
            Err(_) => finish(Err(CsteError::Numerical("fit task panicked".into()))),
        };
        job_session
            .lock()
            .expect("session poisoned")
            .jobs
            .insert(job_token, Job::Done(status, body));
    });
    let location = format!("/v1/sessions/{session_id}/jobs/{token}");
    let mut resp = (
        StatusCode::ACCEPTED,
        Json(json!({ "status": "pending", "token": token, "poll": location, "estimated_seconds": estimate_secs })),
    )
        .into_response();
    if let Ok(v) = HeaderValue::from_str(&location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

fn lookup_dataset(session: &SessionRef, name: &str) -> ApiResult<Arc<StoredDataset>> {
    session
        .lock()
        .expect("session poisoned")
        .datasets
        .get(name)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown dataset {name:?}")))
}

async fn fit_binary(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let mut v = parse_body(&body)?;
    if let Value::Object(m) = &mut v {
        m.entry("n_boot").or_insert(json!(state.config.default_n_boot));
    }
    let target: FitTarget = decode(&v)?;
    let req: BinaryRequest = decode(&v)?;
    req.validate()?;
    let stored = lookup_dataset(&session, &target.dataset)?;
    let Dataset::Binary(d) = &stored.dataset else {
        return Err(ApiError::invalid(format!("dataset {:?} is not a binary dataset", target.dataset)));
    };
    let secs = binary_seconds(d.n(), d.p(), &req);
    let name = target.name.unwrap_or_else(|| target.dataset.clone());
    run_fit(&state, &id, session, name, target.dataset, secs, move || {
        let Dataset::Binary(d) = &stored.dataset else { unreachable!() };
        let o = pipeline::run_binary(d, stored.normalization.as_ref(), &req)?;
        Ok(Outcome {
            artifact: FitArtifact::Binary(Box::new(o.artifact)),
            curve: o.curve,
            regions: o.regions,
        })
    })
    .await
}

async fn fit_survival(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let v = parse_body(&body)?;
    let target: FitTarget = decode(&v)?;
    let req: SurvivalRequest = decode(&v)?;
    req.validate()?;
    let stored = lookup_dataset(&session, &target.dataset)?;
    let Dataset::Survival(d) = &stored.dataset else {
        return Err(ApiError::invalid(format!("dataset {:?} is not a survival dataset", target.dataset)));
    };
    if let Some(l) = &req.contrast {
        if l.len() != d.k() {
            return Err(ApiError::invalid(format!(
                "contrast has {} entries but the dataset has {} treatment arms",
                l.len(),
                d.k()
            )));
        }
    }
    let secs = survival_seconds(d.n(), &req);
    let name = target.name.unwrap_or_else(|| target.dataset.clone());
    run_fit(&state, &id, session, name, target.dataset, secs, move || {
        let Dataset::Survival(d) = &stored.dataset else { unreachable!() };
        let o = pipeline::run_survival(d, &req)?;
        Ok(Outcome {
            artifact: FitArtifact::Survival(Box::new(o.artifact)),
            curve: o.curve,
            regions: o.regions,
        })
    })
    .await
}

#[derive(Deserialize)]
struct PredictionBody {
    fit: String,
    #[serde(default)]
    csv: String,
    #[serde(default)]
    outcome_harmful: bool,
}

fn lookup_fit(session: &SessionRef, name: &str) -> ApiResult<Arc<StoredFit>> {
    session
        .lock()
        .expect("session poisoned")
        .fits
        .get(name)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown fit {name:?}")))
}

async fn predictions(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let body: PredictionBody = decode(&parse_body(&body)?)?;
    let fit = lookup_fit(&session, &body.fit)?;
    let table = parse_covariates(&body.csv, &fit.artifact.score_columns(), fit.artifact.id_column())?;
    let recs = pipeline::predict(&fit.artifact, &fit.regions, &table, body.outcome_harmful)?;
    Ok(Json(json!({ "fit": body.fit, "recommendations": recs })).into_response())
}

#[derive(Deserialize)]
struct CurveQuery {
    format: Option<String>,
}

async fn curve(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Query(q): Query<CurveQuery>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let fit = lookup_fit(&session, &name)?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok((
            [(header::CONTENT_TYPE, "application/json")],
            curve_json(&fit.curve, &fit.regions),
        )
            .into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv")], curve_csv(&fit.curve)).into_response()),
        other => Err(ApiError::invalid(format!("unknown format {other:?}, expected json or csv"))),
    }
}

#[derive(Serialize)]
struct Pending<'a> {
    status: &'a str,
    token: &'a str,
}

async fn job(
    State(state): State<AppState>,
    Path((id, token)): Path<(String, String)>,
) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let job = session
        .lock()
        .expect("session poisoned")
        .jobs
        .get(&token)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown job {token}")))?;
    Ok(match job {
        Job::Pending => (StatusCode::ACCEPTED, Json(Pending { status: "pending", token: &token })).into_response(),
        Job::Done(status, body) => (status, Json(body)).into_response(),
    })
}
