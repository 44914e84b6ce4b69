//! HTTP routes over a shared [`Session`].

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metricscope_core::dataset::{Dataset, FeatureVector};
use metricscope_core::fastmap::Projection3D;
use metricscope_core::index::{QueryStats, ResultSet};
use metricscope_core::svg;
use metricscope_core::workspace::{ParentState, QueryTemplate, Session};
use serde::Serialize;
use serde_json::json;

use crate::error::{ApiError, ApiResult};
use crate::wire::{self, MetricTemplate, PickRequest, QueryRequest};

const DEFAULT_PAGE: usize = 100;
const MAX_PAGE: usize = 10_000;
const MAX_UPLOAD: usize = 256 * 1024 * 1024;

struct Inner {
    session: Session,
    data_dir: Option<PathBuf>,
    persist: std::sync::Mutex<()>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(session: Session, data_dir: Option<PathBuf>) -> Self {
        Self {
            inner: Arc::new(Inner {
                session,
                data_dir,
                persist: std::sync::Mutex::new(()),
            }),
        }
    }

    /// Replays `data_dir` if it holds a saved session, otherwise starts fresh.
    pub fn open(seed: u64, data_dir: Option<PathBuf>) -> ApiResult<Self> {
        let session = match &data_dir {
            Some(dir) if dir.join(metricscope_core::workspace::MANIFEST_FILE).exists() => {
                let s = Session::replay(dir)?;
                if s.seed() != seed {
                    tracing::warn!(saved = s.seed(), requested = seed, "using the saved session seed");
                }
                s
            }
            _ => Session::new(seed),
        };
        Ok(Self::new(session, data_dir))
    }

    pub fn session(&self) -> &Session {
        &self.inner.session
    }

    fn persist(&self) -> ApiResult<()> {
        if let Some(dir) = &self.inner.data_dir {
            let _guard = self.inner.persist.lock().unwrap_or_else(|e| e.into_inner());
            self.inner.session.save(dir)?;
        }
        Ok(())
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

fn params(p: Params) -> ApiResult<HashMap<String, String>> {
    p.map(|Query(m)| m)
        .map_err(|e| ApiError::bad_request(format!("invalid query string: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}/rows", get(dataset_rows))
        .route("/datasets/{id}/overview", get(overview))
        .route("/metrics", get(list_metrics).post(register_metric))
        .route("/queries", post(run_query))
        .route("/workspaces/{id}", get(workspace_summary).delete(close_workspace))
        .route("/workspaces/{id}/projection", get(workspace_projection))
        .route("/workspaces/{id}/views/{technique}", get(workspace_view))
        .route("/workspaces/{id}/pick", post(pick))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

async fn healthz(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "seed": state.session().seed() }))
}

#[derive(Serialize)]
pub struct DatasetSummary {
    pub id: String,
    pub attributes: Vec<String>,
    pub row_count: usize,
}

async fn upload_dataset(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let summary = blocking(move || {
        let ds = Dataset::from_csv_reader(&body[..])?;
        let attributes = ds.attributes().to_vec();
        let row_count = ds.len();
        let id = state.session().add_dataset(ds);
        state.persist()?;
        Ok(DatasetSummary {
            id,
            attributes,
            row_count,
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

#[derive(Serialize)]
struct RowsPage<'a> {
    dataset: &'a str,
    offset: usize,
    limit: usize,
    total: usize,
    rows: &'a [FeatureVector],
}

async fn dataset_rows(State(state): State<AppState>, Path(id): Path<String>, q: Params) -> ApiResult<Response> {
    let q = params(q)?;
    let ds = state.session().dataset(&id)?;
    let offset = q.get("offset").map(|v| wire::parse_one("offset", v)).transpose()?.unwrap_or(0);
    let limit = q.get("limit").map(|v| wire::parse_one("limit", v)).transpose()?.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit must be in 1..={MAX_PAGE}")));
    }
    Ok(Json(RowsPage {
        dataset: &id,
        offset,
        limit,
        total: ds.len(),
        rows: ds.page_rows(offset, limit),
    })
    .into_response())
}

#[derive(Serialize)]
struct ProjectionBody<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workspace_id: Option<&'a str>,
    #[serde(flatten)]
    projection: &'a Projection3D,
}

async fn overview(State(state): State<AppState>, Path(id): Path<String>, q: Params) -> ApiResult<Response> {
    let q = params(q)?;
    let request = wire::metric_from_params(&q)?;
    let body = blocking(move || {
        let descriptor = state.session().registry().instantiate(&request)?;
        let projection = state.session().overview(&id, &descriptor)?;
        Ok(serde_json::to_value(ProjectionBody {
            dataset: Some(&id),
            workspace_id: None,
            projection: &projection,
        })
        .map_err(|e| ApiError::internal(e.to_string()))?)
    })
    .await?;
    Ok(Json(body).into_response())
}

async fn list_metrics(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(json!({ "metrics": state.session().registry().list() }))
}

async fn register_metric(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let template: MetricTemplate = wire::parse_json(&body)?;
    state.session().register_metric(&template.name, template.descriptor())?;
    let entry = state
        .session()
        .registry()
        .list()
        .into_iter()
        .find(|e| e.name == template.name)
        .ok_or_else(|| ApiError::internal("registered metric vanished"))?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

#[derive(Serialize)]
pub struct QueryResponse {
    pub workspace_id: String,
    pub parent: Option<String>,
    pub seed: u64,
    pub result: ResultSet,
    pub stats: QueryStats,
}

async fn run_query(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let request: QueryRequest = wire::parse_json(&body)?;
    let response = blocking(move || {
        let spec = request.to_spec(&state.session().registry())?;
        let ws = state.session().run_query(&spec, request.parent.as_deref())?;
        state.persist()?;
        Ok(QueryResponse {
            workspace_id: ws.id().to_string(),
            parent: ws.provenance().parent.clone(),
            seed: ws.provenance().seed,
            result: ws.result().clone(),
            stats: *ws.stats(),
        })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

async fn workspace_summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let ws = state.session().workspace(&id)?;
    let parent_state: ParentState = state.session().parent_state(&ws);
    Ok(Json(json!({
        "workspace_id": ws.id(),
        "provenance": ws.provenance(),
        "parent_state": parent_state,
        "ancestry": state.session().ancestry(&id),
        "size": ws.result().len(),
    }))
    .into_response())
}

async fn workspace_projection(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let ws = state.session().workspace(&id)?;
    Ok(Json(ProjectionBody {
        dataset: Some(&ws.provenance().query.dataset),
        workspace_id: Some(ws.id()),
        projection: ws.projection(),
    })
    .into_response())
}

async fn workspace_view(
    State(state): State<AppState>,
    Path((id, technique)): Path<(String, String)>,
    q: Params,
) -> ApiResult<Response> {
    let q = params(q)?;
    let t = wire::technique(&technique)?;
    let ws = state.session().workspace(&id)?;
    let view_params = wire::view_params(ws.dataset(), t, &q)?;
    let svg_out = match q.get("format").map(String::as_str) {
        None | Some("json") => false,
        Some("svg") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown format {other:?}"))),
    };
    let view = blocking(move || Ok(ws.derive_view(&view_params)?)).await?;
    if svg_out {
        Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg::render(&view)).into_response())
    } else {
        Ok(Json(&*view).into_response())
    }
}

async fn pick(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<QueryTemplate>> {
    let request: PickRequest = wire::parse_json(&body)?;
    let ws = state.session().workspace(&id)?;
    Ok(Json(ws.pick_center(request.cod)?))
}

async fn close_workspace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(move || {
        state.session().close_workspace(&id)?;
        state.persist()
    })
    .await?;
    Ok(StatusCode::NO_CONTENT)
}
