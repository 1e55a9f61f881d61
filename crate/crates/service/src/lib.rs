//! HTTP API over `hankel-core`: dataset upload, embeddings, window/time
//! selection mapping, forecasts and region-entry queries.
//!
//! All computation runs on the min-max scaled copy of each upload. Embedding
//! and state coordinates are therefore in scaled units; forecast outputs are
//! mapped back to original units.

pub mod api;
pub mod error;
pub mod openapi;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::HeaderValue;
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use store::Store;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Persist uploads and fitted models here and reload uploads on start.
    pub data_dir: Option<PathBuf>,
    /// Allowed CORS origins; empty allows any.
    pub allowed_origins: Vec<String>,
    /// Static UI assets served for paths not matched by the API.
    pub static_dir: Option<PathBuf>,
}

pub fn router(store: Arc<Store>, config: &ServiceConfig) -> Router {
    let cors = if config.allowed_origins.is_empty() {
        CorsLayer::permissive()
    } else {
        let origins: Vec<HeaderValue> = config
            .allowed_origins
            .iter()
            .filter_map(|o| o.parse().ok())
            .collect();
        CorsLayer::permissive().allow_origin(AllowOrigin::list(origins))
    };
    let app = Router::new()
        .route("/datasets", get(api::list).post(api::upload))
        .route("/datasets/{id}", get(api::detail))
        .route("/datasets/{id}/embedding", get(api::embedding))
        .route("/datasets/{id}/selection", post(api::selection))
        .route("/datasets/{id}/forecast", post(api::forecast))
        .route("/datasets/{id}/region-query", post(api::region_query))
        .route("/spec", get(api::openapi))
        .with_state(store);
    let app = match &config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.layer(cors)
}

pub fn build_store(config: &ServiceConfig) -> std::io::Result<Arc<Store>> {
    Ok(Arc::new(match &config.data_dir {
        Some(dir) => Store::with_data_dir(dir)?,
        None => Store::in_memory(),
    }))
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let store = build_store(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store, &config)).await
}
