//! JSON over HTTP. Handlers hand work to the blocking pool since model
//! fitting can take seconds.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use monobo::engine::AlgoConfig;

use crate::error::{CampaignError, FieldError};
use crate::model::CreateCampaign;
use crate::service::{CampaignService, ObserveRequest};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

pub struct ApiError(CampaignError);

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let fields = match &self.0 {
            CampaignError::Validation(f) => f.clone(),
            _ => Vec::new(),
        };
        let body = ErrorBody {
            error: self.0.tag().to_string(),
            message: self.0.to_string(),
            fields,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(svc: &Arc<CampaignService>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&CampaignService) -> crate::error::Result<T> + Send + 'static,
{
    let svc = svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(CampaignError::Config(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

pub fn router(service: Arc<CampaignService>) -> Router {
    Router::new()
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(show))
        .route("/campaigns/{id}/suggest", post(suggest))
        .route("/campaigns/{id}/observe", post(observe))
        .route("/campaigns/{id}/config", axum::routing::put(update_config))
        .route("/campaigns/{id}/export", get(export))
        .route("/campaigns/{id}/slice", get(slice))
        .with_state(service)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(CampaignError::invalid("body", e.to_string())))
}

async fn create(State(svc): State<Arc<CampaignService>>, body: axum::body::Bytes) -> ApiResult<Response> {
    let req: CreateCampaign = parse_body(&body)?;
    let view = blocking(&svc, move |s| s.create(req)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list(State(svc): State<Arc<CampaignService>>) -> ApiResult<Response> {
    let entries = blocking(&svc, |s| s.list()).await?;
    Ok(Json(entries).into_response())
}

async fn show(State(svc): State<Arc<CampaignService>>, Path(id): Path<String>) -> ApiResult<Response> {
    let view = blocking(&svc, move |s| s.get(&id)).await?;
    Ok(Json(view).into_response())
}

async fn suggest(State(svc): State<Arc<CampaignService>>, Path(id): Path<String>) -> ApiResult<Response> {
    let ticket = blocking(&svc, move |s| s.suggest(&id)).await?;
    Ok(Json(ticket).into_response())
}

async fn observe(
    State(svc): State<Arc<CampaignService>>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    let req: ObserveRequest = parse_body(&body)?;
    let view = blocking(&svc, move |s| s.observe(&id, req)).await?;
    Ok(Json(view).into_response())
}

async fn update_config(
    State(svc): State<Arc<CampaignService>>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> ApiResult<Response> {
    let cfg: AlgoConfig = parse_body(&body)?;
    let view = blocking(&svc, move |s| s.update_config(&id, cfg)).await?;
    Ok(Json(view).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default = "csv_format")]
    pub format: String,
}

fn csv_format() -> String {
    "csv".into()
}

async fn export(
    State(svc): State<Arc<CampaignService>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let text = blocking(&svc, move |s| s.export(&id, &q.format)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    pub dim: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Comma-separated coordinates of the point the sweep passes through.
    #[serde(default)]
    pub fixed: Option<String>,
}

fn default_resolution() -> usize {
    50
}

pub fn parse_point(text: &str) -> Result<Vec<f64>, CampaignError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CampaignError::invalid("fixed", format!("'{v}' is not a number")))
        })
        .collect()
}

async fn slice(
    State(svc): State<Arc<CampaignService>>,
    Path(id): Path<String>,
    Query(q): Query<SliceQuery>,
) -> ApiResult<Response> {
    let fixed = q.fixed.as_deref().map(parse_point).transpose()?;
    let out = blocking(&svc, move |s| s.slice(&id, q.dim, q.resolution, fixed)).await?;
    Ok(Json(out).into_response())
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(service: Arc<CampaignService>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
