//! HTTP front end for a [`SearchIndex`] snapshot.
//!
//! Every request takes a reference to the current snapshot when it starts
//! and works on that snapshot alone. `POST /api/admin/reload` validates the
//! new index file completely before swapping the slot, so readers observe
//! either the old index or the new one and never a mixture.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ds4rs_core::api::{self, SearchParams};
use ds4rs_core::{load_index, EmbedError, Embedder, EmbedderConfig, IndexError, SearchError, SearchIndex};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub index_path: PathBuf,
    pub embedder: EmbedderConfig,
    pub cors_allowed_origins: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read index {}: {source}", .path.display())]
    IndexIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Index(#[from] IndexError),
    #[error("FINGERPRINT_MISMATCH: index was built with `{index}` but the query embedder is `{query}`")]
    FingerprintMismatch { index: String, query: String },
    #[error("embedder configuration: {0}")]
    Embedder(#[from] EmbedError),
    #[error("invalid CORS origin `{0}`")]
    InvalidOrigin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

impl ServiceError {
    /// Configuration problems, as opposed to I/O failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ServiceError::FingerprintMismatch { .. }
                | ServiceError::Embedder(_)
                | ServiceError::InvalidOrigin(_)
        )
    }
}

/// Shared state: the snapshot slot plus the query embedder.
pub struct AppState {
    snapshot: RwLock<Arc<SearchIndex>>,
    embedder: Arc<dyn Embedder>,
    index_path: PathBuf,
    reload_guard: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Fails when the index fingerprint differs from the embedder's.
    pub fn new(
        index: SearchIndex,
        embedder: Arc<dyn Embedder>,
        index_path: PathBuf,
    ) -> Result<Self, ServiceError> {
        check_fingerprint(&index, embedder.as_ref())?;
        Ok(AppState {
            snapshot: RwLock::new(Arc::new(index)),
            embedder,
            index_path,
            reload_guard: tokio::sync::Mutex::new(()),
        })
    }

    /// Reads the index at `config.index_path` and builds the configured
    /// embedder.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let index = read_index(&config.index_path)?;
        let spec = config.embedder.spec();
        if spec.fingerprint != index.embedder().fingerprint {
            return Err(ServiceError::FingerprintMismatch {
                index: index.embedder().fingerprint.clone(),
                query: spec.fingerprint,
            });
        }
        let embedder: Arc<dyn Embedder> = Arc::from(config.embedder.build()?);
        AppState::new(index, embedder, config.index_path.clone())
    }

    pub fn snapshot(&self) -> Arc<SearchIndex> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn swap(&self, index: SearchIndex) -> Arc<SearchIndex> {
        let mut slot = self.snapshot.write().expect("snapshot lock poisoned");
        std::mem::replace(&mut *slot, Arc::new(index))
    }
}

fn check_fingerprint(index: &SearchIndex, embedder: &dyn Embedder) -> Result<(), ServiceError> {
    let query = &embedder.spec().fingerprint;
    if *query != index.embedder().fingerprint {
        return Err(ServiceError::FingerprintMismatch {
            index: index.embedder().fingerprint.clone(),
            query: query.clone(),
        });
    }
    Ok(())
}

fn read_index(path: &std::path::Path) -> Result<SearchIndex, ServiceError> {
    let bytes = std::fs::read(path).map_err(|source| ServiceError::IndexIo {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(load_index(&bytes)?)
}

fn json(status: StatusCode, body: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response()
}

fn error(status: StatusCode, code: &str, message: &str) -> Response {
    json(status, api::error_document(code, message))
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    json(
        StatusCode::OK,
        api::health_document(snap.len(), &snap.embedder().fingerprint),
    )
}

async fn search_handler(
    State(state): State<Arc<AppState>>,
    Query(mut params): Query<HashMap<String, String>>,
) -> Response {
    let params = SearchParams {
        q: params.remove("q"),
        size: params.remove("size"),
        task: params.remove("task"),
        domain: params.remove("domain"),
        limit: params.remove("limit"),
    };
    let query = match params.into_query() {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.code(), &e.to_string()),
    };

    let snap = state.snapshot();
    let embedder = state.embedder.clone();
    let joined = tokio::task::spawn_blocking(move || {
        ds4rs_core::search(&snap, &query, embedder.as_ref())
            .map(|outcome| api::search_response(query.text(), &outcome))
    })
    .await;

    match joined {
        Ok(Ok(body)) => json(StatusCode::OK, body),
        Ok(Err(SearchError::EmptyQuery)) => error(
            StatusCode::BAD_REQUEST,
            "MISSING_QUERY",
            "query contains no searchable terms",
        ),
        Ok(Err(SearchError::EmbedderFailure(e))) => error(
            StatusCode::SERVICE_UNAVAILABLE,
            "EMBEDDER_UNAVAILABLE",
            &e.to_string(),
        ),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", &e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", &e.to_string()),
    }
}

async fn dataset_handler(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let snap = state.snapshot();
    match snap.get(&id) {
        Some(entry) => json(StatusCode::OK, api::dataset_document(entry)),
        None => error(
            StatusCode::NOT_FOUND,
            "DATASET_NOT_FOUND",
            &format!("no dataset with id `{id}`"),
        ),
    }
}

async fn reload_handler(State(state): State<Arc<AppState>>) -> Response {
    // one reload at a time; searches are never blocked by this
    let _guard = state.reload_guard.lock().await;
    let path = state.index_path.clone();
    let loaded = tokio::task::spawn_blocking(move || read_index(&path)).await;
    let index = match loaded {
        Ok(Ok(index)) => index,
        Ok(Err(e)) => {
            return error(StatusCode::UNPROCESSABLE_ENTITY, "CORRUPT_INDEX", &e.to_string())
        }
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", &e.to_string()),
    };
    if let Err(e) = check_fingerprint(&index, state.embedder.as_ref()) {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "FINGERPRINT_MISMATCH",
            &e.to_string(),
        );
    }
    let after = index.len();
    let before = state.swap(index).len();
    tracing::info!(before, after, "index reloaded");
    json(StatusCode::OK, api::reload_document(before, after))
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        "{} {} {} {:.1}ms",
        method,
        path,
        response.status().as_u16(),
        start.elapsed().as_secs_f64() * 1000.0
    );
    response
}

fn cors_layer(origins: &[String]) -> Result<CorsLayer, ServiceError> {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        let values = origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::InvalidOrigin(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(values)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any))
}

pub fn router(state: Arc<AppState>, cors_allowed_origins: &[String]) -> Result<Router, ServiceError> {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/search", get(search_handler))
        .route("/api/datasets/{id}", get(dataset_handler))
        .route("/api/admin/reload", post(reload_handler))
        .with_state(state)
        .layer(middleware::from_fn(log_request));
    if !cors_allowed_origins.is_empty() {
        app = app.layer(cors_layer(cors_allowed_origins)?);
    }
    Ok(app)
}

/// Validates the configuration, binds, and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::from_config(&config)?);
    let app = router(state.clone(), &config.cors_allowed_origins)?;
    let listener = tokio::net::TcpListener::bind(&config.listen_address)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.listen_address.clone(),
            source,
        })?;
    let local = listener.local_addr().map_err(ServiceError::Serve)?;
    let snap = state.snapshot();
    tracing::info!(
        "serving {} datasets ({}) on http://{local}",
        snap.len(),
        snap.embedder().fingerprint
    );
    drop(snap);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
