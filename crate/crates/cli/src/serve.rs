//! HTTP interface: prediction, model listing and nomograms.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ed_predict::model::nomogram;
use ed_predict::report::to_json_compact;
use ed_predict::Variable;
use serde::Serialize;
use tower_http::cors::CorsLayer;

use crate::{predict, CardStore, CliError, PredictRequest};

#[derive(Serialize)]
struct VariableInfo {
    name: String,
    min_code: i64,
    max_code: i64,
    missing_code: Option<i64>,
    labels: Vec<(i64, &'static str)>,
}

#[derive(Serialize)]
struct ModelInfo {
    name: String,
    version: String,
    horizon_months: u32,
    variables: Vec<VariableInfo>,
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json; charset=utf-8")], body).into_response()
}

fn error_response(status: StatusCode, err: &CliError) -> Response {
    json_response(status, err.to_json().to_string())
}

async fn predict_handler(
    State(store): State<Arc<CardStore>>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, &CliError::InvalidInput(e.body_text())),
    };
    // only loaded cards are addressable over HTTP, never file paths
    let Some(card) = store.get(&req.model) else {
        return error_response(StatusCode::NOT_FOUND, &CliError::UnknownModel(req.model));
    };
    match predict(card, &req.record, req.apply_calibration) {
        Ok(resp) => json_response(StatusCode::OK, to_json_compact(&resp)),
        Err(e) => error_response(StatusCode::BAD_REQUEST, &e.into()),
    }
}

async fn models_handler(State(store): State<Arc<CardStore>>) -> Response {
    let models: Vec<ModelInfo> = store
        .cards()
        .map(|card| ModelInfo {
            name: card.name.clone(),
            version: card.version.clone(),
            horizon_months: card.horizon_months,
            variables: card
                .terms
                .iter()
                .map(|t| VariableInfo {
                    name: t.variable.clone(),
                    min_code: t.min_code,
                    max_code: t.max_code,
                    missing_code: t.missing_code,
                    labels: Variable::from_name(&t.variable).map_or_else(Vec::new, |v| v.labels().to_vec()),
                })
                .collect(),
        })
        .collect();
    json_response(StatusCode::OK, to_json_compact(&models))
}

async fn nomogram_handler(State(store): State<Arc<CardStore>>, Path(model): Path<String>) -> Response {
    let Some(card) = store.get(&model) else {
        return error_response(StatusCode::NOT_FOUND, &CliError::UnknownModel(model));
    };
    match nomogram(card) {
        Ok(table) => json_response(StatusCode::OK, to_json_compact(&table)),
        Err(e) => error_response(StatusCode::UNPROCESSABLE_ENTITY, &e.into()),
    }
}

async fn health() -> &'static str {
    "ok"
}

/// The service routes over a fixed set of cards. CORS is open so a page
/// served from another origin can call it.
pub fn router(store: CardStore) -> Router {
    Router::new()
        .route("/api/v1/predict", post(predict_handler))
        .route("/api/v1/models", get(models_handler))
        .route("/api/v1/nomogram/{model}", get(nomogram_handler))
        .route("/healthz", get(health))
        .layer(CorsLayer::permissive())
        .with_state(Arc::new(store))
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: CardStore) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
