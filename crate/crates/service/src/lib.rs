//! JSON-over-HTTP interface to the screening workflow.
//!
//! Sessions live in memory and expire after a configurable idle time; only
//! retained cases are durable. All case-base writes go through a single
//! writer lock and are persisted before they become visible. There is no
//! authentication: deploy behind a trusted boundary.

mod error;
mod routes;
mod state;

pub use error::{ApiError, Failure};
pub use routes::{
    router, CaseList, DeleteResponse, Health, RetainResponse, SessionView, DEFAULT_PAGE_LIMIT,
    MAX_PAGE_LIMIT,
};
pub use state::{AppState, ServiceConfig};

use tokio::net::TcpListener;

/// Serves the API on an already-bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
