//! Read-only HTTP endpoints over the session store.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use seatrack_core::{BehaviorCategory, ClassSession, ClassroomConfig, SeatId};

use crate::store::SessionStore;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, error) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
        };
        (code, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn session(store: &SessionStore, id: &str) -> Result<Arc<ClassSession>, ApiError> {
    store.get(id).ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
}

fn category_names() -> Vec<&'static str> {
    BehaviorCategory::BEHAVIORS.iter().map(|c| c.name()).collect()
}

#[derive(Serialize)]
pub struct SessionList {
    pub sessions: Vec<String>,
}

#[derive(Serialize)]
pub struct MetaBody {
    pub id: String,
    pub course_id: String,
    pub config: ClassroomConfig,
    pub duration_s: f64,
    pub version: u64,
    pub occupancy: Vec<SeatId>,
}

#[derive(Serialize)]
pub struct GridSeat {
    pub seat: SeatId,
    pub occupied: bool,
    pub counts: [usize; 5],
}

#[derive(Serialize)]
pub struct GridBody {
    pub rows: u32,
    pub cols: u32,
    pub categories: Vec<&'static str>,
    /// Row-major.
    pub seats: Vec<GridSeat>,
    pub unassigned: [usize; 5],
}

#[derive(Deserialize)]
pub struct HeatmapQuery {
    t: String,
}

#[derive(Serialize)]
pub struct HeatmapBody {
    pub t: f64,
    pub rows: u32,
    pub cols: u32,
    /// `scores[r][c]` for seat `R{r+1}C{c+1}`; `null` when unoccupied.
    pub scores: Vec<Vec<Option<f64>>>,
}

#[derive(Serialize)]
pub struct SequenceEntry {
    pub t: f64,
    pub category: BehaviorCategory,
}

#[derive(Serialize)]
pub struct SequenceBody {
    pub seat: SeatId,
    pub events: Vec<SequenceEntry>,
}

#[derive(Serialize)]
pub struct FlowBody {
    pub sample_interval_s: f64,
    pub categories: Vec<&'static str>,
    pub samples: Vec<[u32; 5]>,
}

#[derive(Serialize)]
pub struct VersionBody {
    pub version: u64,
}

async fn list(State(store): State<Arc<SessionStore>>) -> Json<SessionList> {
    Json(SessionList { sessions: store.ids() })
}

async fn meta(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<MetaBody> {
    let s = session(&store, &id)?;
    Ok(Json(MetaBody {
        id,
        course_id: s.meta.course_id.clone(),
        config: s.config.clone(),
        duration_s: s.duration(),
        version: s.meta.version,
        occupancy: s.occupied_seats(),
    }))
}

async fn grid(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<GridBody> {
    let s = session(&store, &id)?;
    Ok(Json(GridBody {
        rows: s.rows(),
        cols: s.cols(),
        categories: category_names(),
        seats: s
            .tracklets()
            .iter()
            .map(|t| GridSeat { seat: t.seat, occupied: t.occupied, counts: t.counts() })
            .collect(),
        unassigned: s.unassigned_counts(),
    }))
}

async fn heatmap(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    query: Result<Query<HeatmapQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<HeatmapBody> {
    let s = session(&store, &id)?;
    let Query(q) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let t: f64 = q
        .t
        .parse()
        .ok()
        .filter(|t: &f64| t.is_finite())
        .ok_or_else(|| ApiError::BadRequest(format!("`t={}` is not a number", q.t)))?;
    let flat = s.heatmap(t).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(HeatmapBody {
        t,
        rows: s.rows(),
        cols: s.cols(),
        scores: flat.chunks(s.cols() as usize).map(<[_]>::to_vec).collect(),
    }))
}

async fn sequence(
    State(store): State<Arc<SessionStore>>,
    Path((id, seat)): Path<(String, String)>,
) -> ApiResult<SequenceBody> {
    let s = session(&store, &id)?;
    let seat: SeatId = seat.parse().map_err(|_| ApiError::BadRequest(format!("`{seat}` is not a seat id")))?;
    let events = s.sequence(seat).map_err(|e| ApiError::NotFound(e.to_string()))?;
    Ok(Json(SequenceBody {
        seat,
        events: events.into_iter().map(|(t, category)| SequenceEntry { t, category }).collect(),
    }))
}

async fn flow(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<FlowBody> {
    let s = session(&store, &id)?;
    Ok(Json(FlowBody {
        sample_interval_s: s.config.sample_interval_s,
        categories: category_names(),
        samples: s.flow().to_vec(),
    }))
}

async fn version(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<VersionBody> {
    Ok(Json(VersionBody { version: session(&store, &id)?.meta.version }))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", get(list))
        .route("/sessions/{id}/meta", get(meta))
        .route("/sessions/{id}/grid", get(grid))
        .route("/sessions/{id}/heatmap", get(heatmap))
        .route("/sessions/{id}/seats/{seat}/sequence", get(sequence))
        .route("/sessions/{id}/flow", get(flow))
        .route("/sessions/{id}/version", get(version))
        .with_state(store)
}
