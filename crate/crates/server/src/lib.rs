//! HTTP facade over the pipeline: dataset upload, questions, the semantic
//! model, health, and evaluation runs. Abstentions are ordinary 200 responses.

mod config;
mod routes;
mod state;

pub use config::{AppConfig, ConfigError, DatasetFile, ProviderConfig};
pub use routes::{router, ApiError};
pub use state::{AppState, StartupError};

use std::net::SocketAddr;
use std::sync::Arc;

/// Bind `addr` and serve until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
