//! HTTP endpoints for coder sessions and reports.
//!
//! Coders only ever see positional queue item ids; responses never say which
//! segment an item plays or whether it is a repeat.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use vocalcode::analytics::{read_group_csv, Metric, TTestVariant};
use vocalcode::pitch::F0Row;
use vocalcode::scheme::QueueSpec;
use vocalcode::{AnnotationClass, Phase, Segment};

use crate::audio::AudioLibrary;
use crate::error::ServiceError;
use crate::reports::{analysis_report, coder_passes, consensus, ground_truth_coders, observations, reliability_report};
use crate::store::{NewSession, Store};

/// Inputs for the analytics endpoint.
#[derive(Debug, Clone, Default)]
pub struct AnalysisSources {
    pub segments: Vec<Segment>,
    pub f0: Vec<F0Row>,
    /// Group table keyed by recording id, read on each request.
    pub groups_csv: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub library: Arc<AudioLibrary>,
    pub analysis: Arc<AnalysisSources>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/items/{item}/play", post(play))
        .route("/sessions/{id}/items/{item}/label", post(label))
        .route("/sessions/{id}/stats", get(stats))
        .route("/reports/reliability", get(reliability))
        .route("/reports/analytics", get(analytics))
        .with_state(state)
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
struct QueueBody {
    /// Defaults to every segment in the manifest, in id order.
    segment_ids: Option<Vec<String>>,
    #[serde(default)]
    n_duplicates: usize,
    rng_seed: u64,
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    session_id: Option<String>,
    coder_id: String,
    #[serde(default = "ground_truth")]
    phase: Phase,
    queue: QueueBody,
}

fn ground_truth() -> Phase {
    Phase::GroundTruth
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(payload)?;
    if req.coder_id.trim().is_empty() {
        return Err(ServiceError::BadRequest("coder_id must not be empty".into()));
    }
    let segment_ids = match req.queue.segment_ids {
        Some(ids) => {
            let unknown = ids.iter().filter(|id| !state.library.contains(id)).count();
            if unknown > 0 {
                return Err(ServiceError::BadRequest(format!("{unknown} segment ids are not in the manifest")));
            }
            ids
        }
        None => {
            let mut ids: Vec<String> = state.library.segment_ids().map(str::to_string).collect();
            ids.sort();
            ids
        }
    };
    let new = NewSession {
        session_id: req.session_id,
        coder_id: req.coder_id,
        phase: req.phase,
        queue: QueueSpec { segment_ids, n_duplicates: req.queue.n_duplicates, rng_seed: req.queue.rng_seed },
    };
    let store = state.store.clone();
    let created = blocking(move || store.create_session(new)).await?;
    let status = if created.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(created)).into_response())
}

async fn next_item(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let store = state.store.clone();
    Ok(Json(blocking(move || store.next_item(&id)).await?).into_response())
}

async fn stats(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let store = state.store.clone();
    Ok(Json(blocking(move || store.stats(&id)).await?).into_response())
}

async fn play(State(state): State<AppState>, Path((id, item)): Path<(String, String)>) -> Result<Response, ServiceError> {
    let (store, library) = (state.store.clone(), state.library.clone());
    let (wav, remaining) = blocking(move || store.play(&id, &item, |segment| library.segment_wav(segment))).await?;
    let mut response = wav.into_response();
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"));
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    headers.insert("x-remaining-plays", HeaderValue::from(u16::from(remaining)));
    Ok(response)
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    class: u8,
}

async fn label(
    State(state): State<AppState>,
    Path((id, item)): Path<(String, String)>,
    payload: Result<Json<LabelBody>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let class = AnnotationClass::from_code(body(payload)?.class)?;
    let store = state.store.clone();
    Ok(Json(blocking(move || store.label(&id, &item, class)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct ReliabilityQuery {
    a: String,
    b: String,
    exclude_class: Option<u8>,
}

async fn reliability(
    State(state): State<AppState>,
    Query(q): Query<ReliabilityQuery>,
) -> Result<Response, ServiceError> {
    let exclude = q.exclude_class.map(AnnotationClass::from_code).transpose()?;
    let store = state.store.clone();
    let report = blocking(move || {
        let records = store.records();
        let (a, b) = (coder_passes(&records, &q.a), coder_passes(&records, &q.b));
        reliability_report((&q.a, &a), (&q.b, &b), exclude).map_err(|e| ServiceError::BadRequest(e.to_string()))
    })
    .await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Deserialize)]
struct AnalyticsQuery {
    metric: String,
    group_by: String,
    a: Option<String>,
    b: Option<String>,
    #[serde(default)]
    welch: bool,
}

async fn analytics(State(state): State<AppState>, Query(q): Query<AnalyticsQuery>) -> Result<Response, ServiceError> {
    let metric: Metric = q.metric.parse().map_err(ServiceError::BadRequest)?;
    let variant = if q.welch { TTestVariant::Welch } else { TTestVariant::Pooled };
    let (store, sources) = (state.store.clone(), state.analysis.clone());
    let report = blocking(move || {
        let path = sources
            .groups_csv
            .as_ref()
            .ok_or_else(|| ServiceError::BadRequest("the server was started without a group table".into()))?;
        let file = std::fs::File::open(path).map_err(|e| ServiceError::Storage(format!("group table: {e}")))?;
        let groups: BTreeMap<String, String> =
            read_group_csv(file, &q.group_by).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let records = store.records();
        let (a, b) = match (q.a, q.b) {
            (Some(a), Some(b)) => (a, b),
            (None, None) => match ground_truth_coders(&records).as_slice() {
                [a, b] => (a.clone(), b.clone()),
                other => {
                    return Err(ServiceError::BadRequest(format!(
                        "found {} coders with ground-truth labels; name two with a= and b=",
                        other.len()
                    )))
                }
            },
            _ => return Err(ServiceError::BadRequest("give both a= and b= or neither".into())),
        };
        let (agreed, unmatched) = consensus(&coder_passes(&records, &a), &coder_passes(&records, &b));
        let obs = observations(&sources.segments, &agreed, &sources.f0);
        analysis_report(&obs, unmatched, Some(&groups), &[metric], variant)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    })
    .await?;
    Ok(Json(report).into_response())
}
