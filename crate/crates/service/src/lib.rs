//! HTTP/JSON front end for the road-grade estimator.
//!
//! Every endpoint takes and returns JSON; the bodies are defined in
//! `roadgrade-api`. Work runs on the blocking thread pool so long
//! simulations do not stall the runtime.

pub mod ops;

use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tracing::{error, warn};

use roadgrade_api::{
    AcceptanceRequest, AcceptanceResponse, ErrorBody, FitBiasRequest, FitBiasResponse, Health, ReplayRequest,
    ReportRequest, RunSummary, SimulateRequest,
};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl From<roadgrade_core::Error> for ApiError {
    fn from(e: roadgrade_core::Error) -> Self {
        let status = match e {
            roadgrade_core::Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self {
            status: e.status(),
            message: e.body_text(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            error!(status = %self.status, "{}", self.message);
        } else {
            warn!(status = %self.status, "{}", self.message);
        }
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<Req, T>(body: Result<Json<Req>, JsonRejection>, f: fn(&Req) -> roadgrade_core::Result<T>) -> ApiResult<T>
where
    Req: Send + 'static,
    T: Send + 'static,
{
    let Json(req) = body?;
    let result = tokio::task::spawn_blocking(move || f(&req))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        })?;
    Ok(Json(result?))
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn simulate(body: Result<Json<SimulateRequest>, JsonRejection>) -> ApiResult<RunSummary> {
    blocking(body, ops::simulate).await
}

async fn replay(body: Result<Json<ReplayRequest>, JsonRejection>) -> ApiResult<RunSummary> {
    blocking(body, ops::replay).await
}

async fn fit_bias(body: Result<Json<FitBiasRequest>, JsonRejection>) -> ApiResult<FitBiasResponse> {
    blocking(body, ops::fit_bias).await
}

async fn report(body: Result<Json<ReportRequest>, JsonRejection>) -> ApiResult<RunSummary> {
    blocking(body, ops::report).await
}

async fn acceptance(body: Result<Json<AcceptanceRequest>, JsonRejection>) -> ApiResult<AcceptanceResponse> {
    blocking(body, ops::acceptance).await
}

pub fn router() -> Router {
    Router::new()
        .route(roadgrade_api::HEALTH, get(health))
        .route(roadgrade_api::SIMULATE, post(simulate))
        .route(roadgrade_api::REPLAY, post(replay))
        .route(roadgrade_api::FIT_BIAS, post(fit_bias))
        .route(roadgrade_api::REPORT, post(report))
        .route(roadgrade_api::ACCEPTANCE, post(acceptance))
}

/// Binds `addr` and serves in a background task. Port 0 picks a free port;
/// the bound address is returned.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let handle = tokio::spawn(async move { axum::serve(listener, router()).await });
    Ok((bound, handle))
}
