//! REST control plane for optimization sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/sessions` | create and initialize a session (201) |
//! | `GET` | `/sessions` | list sessions |
//! | `GET` | `/sessions/{id}` | status summary |
//! | `POST` | `/sessions/{id}/run` | `{"iterations": n}` or `{"seconds": s}` (202) |
//! | `POST` | `/sessions/{id}/pause` | pause at the next iteration boundary (202) |
//! | `GET` | `/sessions/{id}/front?split=valid\|test&format=json\|csv` | Pareto front table |
//! | `GET` | `/sessions/{id}/path` | per-iteration values and running best |
//! | `PATCH` | `/sessions/{id}/weights` | replace the weight box |
//!
//! Errors are `{code, message, field?}`. Each run executes on its own worker
//! thread which publishes a copy of the session and, when a snapshot
//! directory is configured, writes the snapshot after every iteration.

mod error;
mod routes;
mod state;

pub use error::{ApiError, ApiResult, ErrorBody};
pub use routes::router;
pub use state::{write_atomic, AppState, SessionInfo};

/// Serve until ctrl-c, then pause running sessions and wait for their
/// workers to checkpoint.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let app = router(state.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    state.pause_all();
    while state.any_running() {
        tokio::time::sleep(std::time::Duration::from_millis(100)).await;
    }
    Ok(())
}
