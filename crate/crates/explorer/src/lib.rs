//! Read-only HTTP view of a node's chain.
//!
//! Handlers read an immutable [`Snapshot`] that the node replaces after each
//! head change, so a response never mixes two chain states.

mod routes;
mod snapshot;

use std::net::SocketAddr;

use tokio::net::TcpListener;

pub use routes::{
    router, AccountJson, AnchorsJson, BlockJson, ContractJson, ExplorerState, HeadJson,
    HistoryItem, ReceiptSummary, TxJson, DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE,
};
pub use snapshot::{Direction, SharedSnapshot, Snapshot, TxLocation};

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: ExplorerState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "explorer listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
