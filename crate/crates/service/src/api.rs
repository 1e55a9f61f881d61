use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use hankel_core::linalg::to_rows;
use hankel_core::spectral::EmbeddingJson;
use hankel_core::{forecast as kalman_forecast, next_region_entry, Region};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::{EmbeddingKey, RankKey, Store};

pub type AppState = Arc<Store>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub id: String,
    #[serde(rename = "T")]
    pub length: usize,
    #[serde(rename = "D")]
    pub channels: usize,
    pub channel_names: Vec<String>,
}

pub async fn upload(State(store): State<AppState>, request: Request) -> Result<impl IntoResponse, ApiError> {
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let bytes = if is_multipart {
        let mut form = Multipart::from_request(request, &())
            .await
            .map_err(|e| ApiError::BadRequest(e.body_text()))?;
        let field = form
            .next_field()
            .await
            .map_err(|e| ApiError::BadRequest(e.body_text()))?
            .ok_or_else(|| ApiError::BadRequest("multipart upload has no file field".into()))?;
        field.bytes().await.map_err(|e| ApiError::BadRequest(e.body_text()))?
    } else {
        Bytes::from_request(request, &())
            .await
            .map_err(|e| ApiError::BadRequest(e.body_text()))?
    };
    let ds = blocking(move || store.upload(&bytes)).await?;
    let summary = DatasetSummary {
        id: ds.id.clone(),
        length: ds.series.len(),
        channels: ds.series.channels(),
        channel_names: ds.series.resolved_channel_names(),
    };
    Ok((StatusCode::CREATED, Json(summary)))
}

pub async fn list(State(store): State<AppState>) -> Json<Vec<String>> {
    Json(store.ids())
}

#[derive(Debug, Serialize)]
pub struct DatasetDetail {
    #[serde(flatten)]
    pub summary: DatasetSummary,
    /// `T × D`, original units.
    pub values: Vec<Vec<f64>>,
    pub timestamps: Option<Vec<String>>,
}

pub async fn detail(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<DatasetDetail>, ApiError> {
    let ds = store.get(&id)?;
    let series = &ds.series;
    Ok(Json(DatasetDetail {
        summary: DatasetSummary {
            id: ds.id.clone(),
            length: series.len(),
            channels: series.channels(),
            channel_names: series.resolved_channel_names(),
        },
        values: to_rows(series.values()),
        timestamps: series
            .timestamps()
            .map(|ts| ts.iter().map(|t| t.to_string()).collect()),
    }))
}

fn query_param<T: FromStr>(q: &HashMap<String, String>, name: &str) -> Result<Option<T>, ApiError> {
    match q.get(name).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| ApiError::Unprocessable(format!("invalid value for {name}: {raw:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Timecluster,
    Subspace,
}

#[derive(Debug, Serialize)]
pub struct EmbeddingResponse {
    pub method: Method,
    pub center: bool,
    #[serde(flatten)]
    pub embedding: EmbeddingJson,
    pub singular_values: Vec<f64>,
    /// Procrustes residual between the two methods at these parameters.
    pub align_residual: f64,
}

pub async fn embedding(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<EmbeddingResponse>, ApiError> {
    let ds = store.get(&id)?;
    let window_length = query_param(&q, "L")?
        .ok_or_else(|| ApiError::Unprocessable("query parameter L is required".into()))?;
    let rank = RankKey::new(query_param(&q, "rank")?, query_param(&q, "epsilon")?)?;
    let center = query_param(&q, "center")?.unwrap_or(false);
    let method = match q.get("method").map(String::as_str) {
        None | Some("subspace") => Method::Subspace,
        Some("timecluster") => Method::Timecluster,
        Some(other) => {
            return Err(ApiError::Unprocessable(format!(
                "method must be timecluster or subspace, got {other:?}"
            )))
        }
    };
    let key = EmbeddingKey {
        window_length,
        rank,
        center,
    };
    let pair = blocking(move || ds.embedding(key)).await?;
    let chosen = match method {
        Method::Timecluster => &pair.timecluster,
        Method::Subspace => &pair.subspace,
    };
    Ok(Json(EmbeddingResponse {
        method,
        center,
        embedding: chosen.to_json(),
        singular_values: pair.singular_values.clone(),
        align_residual: pair.align_residual,
    }))
}

#[derive(Debug, Deserialize)]
pub struct SelectionRequest {
    #[serde(rename = "L")]
    pub window_length: usize,
    pub window_indices: Option<Vec<usize>>,
    pub time_range: Option<[usize; 2]>,
}

#[derive(Debug, Default, Serialize)]
pub struct SelectionResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_ranges: Option<Vec<[usize; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_indices: Option<Vec<usize>>,
}

pub async fn selection(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SelectionRequest>,
) -> Result<Json<SelectionResponse>, ApiError> {
    let ds = store.get(&id)?;
    let l = req.window_length;
    let windows = ds.windows(l)?;
    if req.window_indices.is_none() && req.time_range.is_none() {
        return Err(ApiError::Unprocessable(
            "give window_indices or time_range".into(),
        ));
    }
    let mut out = SelectionResponse::default();
    if let Some(indices) = req.window_indices {
        if let Some(bad) = indices.iter().find(|&&w| w >= windows) {
            return Err(ApiError::Unprocessable(format!(
                "window index {bad} out of range, there are {windows} windows"
            )));
        }
        out.time_ranges = Some(indices.iter().map(|&w| [w, w + l - 1]).collect());
    }
    if let Some([start, end]) = req.time_range {
        let t = ds.series.len();
        if start > end || end >= t {
            return Err(ApiError::Unprocessable(format!(
                "time range [{start}, {end}] is not within 0..{t}"
            )));
        }
        // windows [w, w+L−1] that intersect [start, end]
        let first = (start + 1).saturating_sub(l);
        let last = end.min(windows - 1);
        out.window_indices = Some((first..=last).collect());
    }
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
pub struct ForecastRequest {
    #[serde(rename = "L")]
    pub window_length: usize,
    pub rank: Option<usize>,
    pub epsilon: Option<f64>,
    pub h: usize,
}

#[derive(Debug, Serialize)]
pub struct ForecastResponse {
    pub horizon: usize,
    /// Sample index of the first forecast step.
    pub start: usize,
    pub n: usize,
    pub predicted_states: Vec<Vec<f64>>,
    /// Original units.
    pub predicted_outputs: Vec<Vec<f64>>,
    /// Original units.
    pub output_covariances: Vec<Vec<Vec<f64>>>,
}

pub async fn forecast(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ForecastRequest>,
) -> Result<Json<ForecastResponse>, ApiError> {
    let ds = store.get(&id)?;
    if req.h == 0 {
        return Err(ApiError::Unprocessable("h must be at least 1".into()));
    }
    let rank = RankKey::new(req.rank, req.epsilon)?;
    let persist = store.data_dir().map(|p| p.to_path_buf());
    let ds2 = ds.clone();
    let fitted = blocking(move || ds2.model(req.window_length, rank, persist.as_deref())).await?;
    let result = kalman_forecast(&fitted.model, &fitted.last, req.h)?;
    let ranges = &ds.scaling.ranges;
    let span = |i: usize| ranges[i].1 - ranges[i].0;
    let predicted_outputs = result
        .predicted_outputs
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, v)| ranges[i].0 + v * span(i))
                .collect()
        })
        .collect();
    let output_covariances = result
        .output_covariances
        .iter()
        .map(|cov| {
            (0..cov.nrows())
                .map(|i| (0..cov.ncols()).map(|j| cov[(i, j)] * span(i) * span(j)).collect())
                .collect()
        })
        .collect();
    Ok(Json(ForecastResponse {
        horizon: result.horizon,
        start: ds.series.len(),
        n: fitted.model.n(),
        predicted_states: to_rows(&result.predicted_states),
        predicted_outputs,
        output_covariances,
    }))
}

#[derive(Debug, Deserialize)]
pub struct RegionRequest {
    #[serde(rename = "L")]
    pub window_length: usize,
    pub rank: Option<usize>,
    pub epsilon: Option<f64>,
    pub region: Region,
    pub horizon: usize,
}

#[derive(Debug, Serialize)]
pub struct RegionResponse {
    pub steps_until_entry: Option<usize>,
}

pub async fn region_query(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<RegionRequest>,
) -> Result<Json<RegionResponse>, ApiError> {
    let ds = store.get(&id)?;
    if req.horizon == 0 {
        return Err(ApiError::Unprocessable("horizon must be at least 1".into()));
    }
    let rank = RankKey::new(req.rank, req.epsilon)?;
    let persist = store.data_dir().map(|p| p.to_path_buf());
    let fitted = blocking(move || ds.model(req.window_length, rank, persist.as_deref())).await?;
    let steps = next_region_entry(&fitted.model, &fitted.last, &req.region, req.horizon)?;
    Ok(Json(RegionResponse {
        steps_until_entry: steps,
    }))
}

pub async fn openapi() -> Json<serde_json::Value> {
    Json(crate::openapi::document())
}
