use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::error::{ApiError, Result};
use crate::session::{LabelRecord, Progress, Session, TaskKind, TaskStatus, TaskSummary};

pub const DEFAULT_PER_PAGE: usize = 50;
pub const MAX_PER_PAGE: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    session: Option<Arc<RwLock<Session>>>,
    assets: Option<Arc<PathBuf>>,
}

impl AppState {
    pub fn new(session: Option<Session>, assets: Option<PathBuf>) -> Self {
        Self {
            session: session.map(|s| Arc::new(RwLock::new(s))),
            assets: assets.map(Arc::new),
        }
    }

    fn session(&self) -> Result<&Arc<RwLock<Session>>> {
        self.session.as_ref().ok_or(ApiError::NoSession)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/tasks", get(list_tasks))
        .route("/api/tasks/{id}/image", get(task_image))
        .route("/api/tasks/{id}/label", post(submit_label))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .fallback(static_asset)
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct TaskQuery {
    kind: Option<String>,
    status: Option<String>,
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TaskPage {
    total: usize,
    page: usize,
    per_page: usize,
    tasks: Vec<TaskSummary>,
}

async fn list_tasks(State(state): State<AppState>, Query(q): Query<TaskQuery>) -> Result<Json<TaskPage>> {
    let session = state.session()?.read().await;
    let kind = q.kind.as_deref().map(str::parse).transpose()?;
    let status = match q.status.as_deref().unwrap_or("unlabeled") {
        "unlabeled" => Some(TaskStatus::Unlabeled),
        "labeled" => Some(TaskStatus::Labeled),
        "all" => None,
        other => {
            return Err(ApiError::BadRequest(format!(
                "unknown status {other:?} (expected unlabeled, labeled or all)"
            )))
        }
    };
    let page = q.page.unwrap_or(1).max(1);
    let per_page = q.per_page.unwrap_or(DEFAULT_PER_PAGE).clamp(1, MAX_PER_PAGE);
    let (total, tasks) = session.list(kind, status, page, per_page);
    Ok(Json(TaskPage {
        total,
        page,
        per_page,
        tasks,
    }))
}

async fn task_image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response> {
    let bytes = state.session()?.read().await.image(&id)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    label: String,
}

async fn submit_label(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<LabelBody>,
) -> Result<Json<LabelRecord>> {
    // The write lock makes this the single writer; the journal is synced
    // before the response is built.
    let record = state.session()?.write().await.submit(&id, &body.label)?;
    Ok(Json(record))
}

async fn progress(State(state): State<AppState>) -> Result<Json<Progress>> {
    Ok(Json(state.session()?.read().await.progress()))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    kind: String,
}

async fn export(State(state): State<AppState>, Query(q): Query<ExportQuery>) -> Result<Response> {
    let kind: TaskKind = q.kind.parse()?;
    let csv = state.session()?.read().await.export_csv(kind)?;
    let disposition = format!("attachment; filename=\"{kind}_labels.csv\"");
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        csv,
    )
        .into_response())
}

async fn static_asset(State(state): State<AppState>, uri: Uri) -> Response {
    let Some(root) = state.assets.as_deref() else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let Some(path) = asset_path(root, uri.path()) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// Maps a request path inside `root`, refusing anything that could escape it.
fn asset_path(root: &Path, request: &str) -> Option<PathBuf> {
    let rel = request.trim_start_matches('/');
    let rel = if rel.is_empty() || rel.ends_with('/') {
        format!("{rel}index.html")
    } else {
        rel.to_string()
    };
    let rel = Path::new(&rel);
    if rel.components().all(|c| matches!(c, Component::Normal(_))) {
        Some(root.join(rel))
    } else {
        None
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

/// Serves on `127.0.0.1:port` until the process is stopped. A directory
/// without `tasks.json` starts the server with no session loaded.
pub async fn serve(session_dir: &Path, port: u16, assets: Option<PathBuf>) -> Result<()> {
    let session = if session_dir.join(crate::session::TASKS_FILE).exists() {
        Some(Session::open(session_dir)?)
    } else {
        None
    };
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("label-serve listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(session, assets))).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asset_paths_stay_inside_root() {
        let root = Path::new("/srv/ui");
        assert_eq!(asset_path(root, "/"), Some(root.join("index.html")));
        assert_eq!(asset_path(root, "/app.js"), Some(root.join("app.js")));
        assert_eq!(asset_path(root, "/a/../../etc/passwd"), None);
        assert_eq!(asset_path(root, "/./x"), None);
    }
}
