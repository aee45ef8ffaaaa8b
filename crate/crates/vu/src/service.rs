//! HTTP interface. Request and response bodies are JSON; errors carry a
//! machine-readable `code` (see `docs/api.md`).

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use vu_core::metrics::BlankPolicy;
use vu_core::model::{FamiliarityPooling, FreeTextItem, GroupView};

use crate::platform::{Platform, PlatformError};
use crate::report::{render, Render, ReportKind, ReportOptions};

/// Error body: `{"code", "message", "details"}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn bad(code: &str, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code: code.into(), message: message.into(), details: None }
    }
}

impl From<PlatformError> for ApiError {
    fn from(e: PlatformError) -> Self {
        Self {
            status: StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            code: e.code().into(),
            message: e.to_string(),
            details: e.details(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "details": self.details });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad("malformed_body", e.to_string()))
}

async fn blocking<T: Send + 'static>(
    p: Arc<Platform>,
    f: impl FnOnce(&Platform) -> Result<T, PlatformError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(move || f(&p)).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal_error".into(),
            message: e.to_string(),
            details: None,
        }),
    }
}

fn ok<T: Serialize>(v: T) -> Response {
    Json(v).into_response()
}

pub fn router(platform: Arc<Platform>) -> Router {
    Router::new()
        .route("/studies", post(create_study))
        .route("/studies/{id}/participants", post(register))
        .route("/studies/{id}/reports/{kind}", get(report))
        .route("/studies/{id}/stimuli/{seq}", get(stimulus))
        .route("/sessions/{token}", get(session))
        .route("/sessions/{token}/start", post(start))
        .route("/sessions/{token}/familiarity", post(familiarity))
        .route("/sessions/{token}/loops", post(record_loop))
        .route("/sessions/{token}/advance", post(advance))
        .route("/sessions/{token}/responses", post(respond))
        .fallback(|| async {
            ApiError { status: StatusCode::NOT_FOUND, code: "not_found".into(), message: "no such route".into(), details: None }
        })
        .with_state(platform)
}

async fn create_study(
    State(p): State<Arc<Platform>>,
    Query(q): Query<HashMap<String, String>>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let strict = match q.get("strict").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") | Some("") => true,
        Some(other) => return Err(ApiError::bad("invalid_option", format!("strict must be true or false, got `{other}`"))),
    };
    let def = body(&bytes)?;
    let created = blocking(p, move |p| p.create_study(def, strict)).await?;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn register(State(p): State<Arc<Platform>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    let r = blocking(p, move |p| p.register(&id, req)).await?;
    Ok((StatusCode::CREATED, Json(r)).into_response())
}

async fn session(State(p): State<Arc<Platform>>, Path(token): Path<String>) -> ApiResult<Response> {
    Ok(ok(blocking(p, move |p| p.get_session(&token)).await?))
}

async fn start(State(p): State<Arc<Platform>>, Path(token): Path<String>) -> ApiResult<Response> {
    Ok(ok(blocking(p, move |p| p.start_session(&token)).await?))
}

async fn familiarity(State(p): State<Arc<Platform>>, Path(token): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(ok(blocking(p, move |p| p.submit_familiarity(&token, req)).await?))
}

async fn record_loop(State(p): State<Arc<Platform>>, Path(token): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(ok(blocking(p, move |p| p.record_loop(&token, req)).await?))
}

async fn advance(State(p): State<Arc<Platform>>, Path(token): Path<String>) -> ApiResult<Response> {
    Ok(ok(blocking(p, move |p| p.advance(&token)).await?))
}

async fn respond(State(p): State<Arc<Platform>>, Path(token): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req = body(&bytes)?;
    Ok(ok(blocking(p, move |p| p.submit_response(&token, req)).await?))
}

async fn stimulus(State(p): State<Arc<Platform>>, Path((id, seq)): Path<(String, String)>) -> ApiResult<Response> {
    Ok(ok(blocking(p, move |p| p.get_stimulus(&id, &seq)).await?))
}

/// Parses report query parameters shared by the service and the CLI.
pub fn report_options(q: &HashMap<String, String>) -> Result<(GroupView, ReportOptions, Render), String> {
    let mut o = ReportOptions::default();
    let group = match q.get("group") {
        Some(g) => GroupView::parse(g).ok_or_else(|| format!("unknown group `{g}`"))?,
        None => GroupView::General,
    };
    if let Some(k) = q.get("k") {
        o.k = k.parse().map_err(|_| format!("k must be a positive integer, got `{k}`"))?;
    }
    if let Some(t) = q.get("threshold") {
        o.threshold = t.parse().map_err(|_| format!("threshold must be a positive integer, got `{t}`"))?;
    }
    if let Some(p) = q.get("policy") {
        o.policy = BlankPolicy::parse(p).ok_or_else(|| format!("unknown blank policy `{p}`"))?;
    }
    if let Some(f) = q.get("fr") {
        o.familiarity_pooling = Some(FamiliarityPooling::parse(f).ok_or_else(|| format!("unknown familiarity pooling `{f}`"))?);
    }
    if let Some(items) = q.get("items") {
        o.items = items
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| FreeTextItem::parse(s).ok_or_else(|| format!("unknown item `{s}`")))
            .collect::<Result<_, _>>()?;
    }
    let format = match q.get("format") {
        Some(f) => Render::parse(f).ok_or_else(|| format!("unknown format `{f}`"))?,
        None => Render::Json,
    };
    Ok((group, o, format))
}

async fn report(
    State(p): State<Arc<Platform>>,
    Path((id, kind)): Path<(String, String)>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let kind = ReportKind::parse(&kind).ok_or_else(|| ApiError {
        status: StatusCode::NOT_FOUND,
        code: "unknown_report".into(),
        message: format!("unknown report kind `{kind}`"),
        details: Some(json!({ "kinds": ["metrics", "semantic", "demographics", "histogram"] })),
    })?;
    let (group, options, format) = report_options(&q).map_err(|m| ApiError::bad("invalid_option", m))?;
    let doc = blocking(p, move |p| p.get_report(&id, kind, group, &options)).await?;
    let content_type = match format {
        Render::Json => "application/json",
        Render::Csv => "text/csv; charset=utf-8",
        Render::Text => "text/plain; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], render(&doc, format)).into_response())
}

/// Serves until ctrl-c.
pub async fn serve(platform: Arc<Platform>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(platform))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
