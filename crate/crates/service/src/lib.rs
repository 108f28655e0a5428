//! HTTP coordinator for fair-draw ceremonies.
//!
//! Every accepted mutation is appended to the session's transcript and synced
//! to disk before the response is sent. On startup each transcript is
//! re-verified; one that fails is quarantined rather than repaired.

pub mod api;
pub mod error;
pub mod http;
pub mod registry;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

pub use api::*;
pub use error::ServiceError;
pub use http::router;
pub use registry::{system_clock, Clock, Registry, Windows};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub windows: Windows,
    pub sweep_interval: Duration,
}

/// Loads persisted sessions, binds `config.listen`, calls `on_ready` with the
/// bound address, and serves until interrupted.
pub async fn serve(config: ServiceConfig, on_ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let registry = Arc::new(Registry::open(&config.data_dir, system_clock(), config.windows)?);
    log::info!("loaded {} sessions from {}", registry.session_ids().len(), config.data_dir.display());

    let sweeper = Arc::clone(&registry);
    let interval = config.sweep_interval.max(Duration::from_millis(10));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(interval);
        loop {
            tick.tick().await;
            sweeper.sweep().await;
        }
    });

    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    on_ready(listener.local_addr()?);
    let app = router(registry);
    tokio::select! {
        r = axum::serve(listener, app) => r,
        _ = tokio::signal::ctrl_c() => {
            log::info!("interrupted, shutting down");
            Ok(())
        }
    }
}
