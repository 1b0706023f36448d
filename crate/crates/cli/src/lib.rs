//! Command implementations, configuration loading and the HTTP services
//! behind the `evreward` binary.

pub mod commands;
pub mod error;
pub mod mock_server;
pub mod service;
pub mod settings;

use std::net::SocketAddr;

use axum::Router;

pub use error::CliError;

/// Binds `addr` and serves `app` on the current tokio runtime, returning
/// the bound address and a handle to the server task.
pub async fn spawn_server(
    addr: SocketAddr,
    app: Router,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((local, handle))
}
