//! HTTP server exposing the design, root-finding and simulation operations
//! as JSON endpoints, plus static hosting of the browser demo.

pub mod api;

use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qpdesign::Progress;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use api::{ApiError, Defaults, Endpoint, ErrorCode};

/// Listener and resource settings; every flag has an environment fallback.
#[derive(Debug, Clone, clap::Args)]
pub struct ServeConfig {
    /// Listen address
    #[arg(long, env = "QPDESIGN_ADDRESS", default_value = "127.0.0.1")]
    pub address: IpAddr,

    /// Listen port
    #[arg(long, env = "QPDESIGN_PORT", default_value_t = 8080)]
    pub port: u16,

    /// Worker threads for grid and subdivision parallelism (default: all cores)
    #[arg(long, env = "QPDESIGN_THREADS")]
    pub threads: Option<usize>,

    /// Default admissibility grid, e.g. 400x400
    #[arg(long, env = "QPDESIGN_GRID", default_value = "400x400", value_parser = parse_grid)]
    pub grid: [usize; 2],

    /// Directory of static files served at `/`
    #[arg(long, env = "QPDESIGN_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            address: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            threads: None,
            grid: [400, 400],
            ui_dir: None,
        }
    }
}

/// Parses `NxM` or `N,M`.
pub fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    match parts.as_slice() {
        [a, b] => {
            let a = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b = b.trim().parse().map_err(|e| format!("{e}"))?;
            Ok([a, b])
        }
        _ => Err(format!("expected NxM, got {s:?}")),
    }
}

/// Sizes the global worker pool. Only the first call has an effect.
pub fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

#[derive(Clone)]
struct AppState {
    defaults: Defaults,
}

pub fn router(config: &ServeConfig) -> Router {
    let state = Arc::new(AppState {
        defaults: Defaults { grid: config.grid },
    });
    let mut app = Router::new().route("/health", get(health));
    for ep in Endpoint::ALL {
        app = app.route(
            ep.path(),
            post(move |State(s): State<Arc<AppState>>, body: Bytes| run(s, ep, body)),
        );
    }
    let app = app.with_state(state);
    match &config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(config: ServeConfig) -> std::io::Result<()> {
    init_threads(config.threads);
    let addr = SocketAddr::new(config.address, config.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(&config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<Value> {
    Json(json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "build": if cfg!(debug_assertions) { "debug" } else { "release" },
        "endpoints": Endpoint::ALL.iter().map(|e| e.path()).collect::<Vec<_>>(),
    }))
}

fn error_response(err: ApiError) -> Response {
    let status = StatusCode::from_u16(err.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(err)).into_response()
}

async fn run(state: Arc<AppState>, endpoint: Endpoint, body: Bytes) -> Response {
    let mut value: Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            let err = ApiError::bad_input(format!("malformed JSON: {e}"));
            return (StatusCode::BAD_REQUEST, Json(err)).into_response();
        }
    };
    let deadline = match api::take_deadline(&mut value) {
        Ok(d) => d,
        Err(e) => return error_response(e),
    };
    let progress = Arc::new(Progress::new());
    let worker = {
        let progress = progress.clone();
        let defaults = state.defaults;
        tokio::task::spawn_blocking(move || {
            api::handle(endpoint, value, &defaults, &progress).map(|out| out.to_json())
        })
    };
    let joined = match deadline {
        None => worker.await,
        Some(ms) => match tokio::time::timeout(Duration::from_millis(ms), worker).await {
            Ok(joined) => joined,
            Err(_) => {
                progress.cancel();
                return error_response(ApiError::deadline(&progress));
            }
        },
    };
    match joined {
        Ok(Ok(doc)) => Json(doc).into_response(),
        Ok(Err(e)) => error_response(e),
        Err(join) => error_response(ApiError {
            code: ErrorCode::Internal,
            message: format!("worker failed: {join}"),
            details: None,
        }),
    }
}
