//! HTTP service for the browser extension plus the feedback log it fills.
//!
//! Endpoints: `POST /recommend`, `POST /feedback`, `GET /health`. Feedback is
//! appended as JSON lines by a single writer task so concurrent requests never
//! interleave within a line.

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::sync::{mpsc, oneshot};
use tower_http::cors::{Any, CorsLayer};

use crate::catalog::CATALOG_VERSION;
use crate::model::QuestionRanker;
use crate::recommend::{top_recommendation, Recommendation, ScoredRanking, SERVING_THRESHOLD};
use crate::tokenize::tokenize;
use crate::NUM_QUESTIONS;

/// Environment variable that overrides the bind address.
pub const BIND_ENV: &str = "QQSE_BIND";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("feedback log {path}: {source}")]
    FeedbackLog { path: PathBuf, source: std::io::Error },
    #[error("invalid bind address {0:?}")]
    BadAddress(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackEvent {
    NotRelevant,
    Updated,
}

/// One user interaction with a served question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub timestamp: String,
    pub query: String,
    pub cq_id: u8,
    pub event: FeedbackEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub useful: Option<bool>,
}

/// Body of `POST /feedback`: a record without its timestamp.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub query: String,
    pub cq_id: u8,
    pub event: FeedbackEvent,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub useful: Option<bool>,
}

impl FeedbackRequest {
    pub fn validate(&self) -> Result<(), String> {
        if self.query.trim().is_empty() {
            return Err("query is empty".into());
        }
        if self.cq_id == 0 || self.cq_id as usize > NUM_QUESTIONS {
            return Err(format!("cq_id {} outside 1..=16", self.cq_id));
        }
        match self.event {
            FeedbackEvent::NotRelevant if self.answer.is_some() || self.useful.is_some() => {
                Err("not_relevant feedback carries no answer or usefulness".into())
            }
            FeedbackEvent::Updated if self.answer.as_deref().is_none_or(|a| a.trim().is_empty()) => {
                Err("updated feedback requires an answer".into())
            }
            _ => Ok(()),
        }
    }

    pub fn stamp(self, at: DateTime<Utc>) -> FeedbackRecord {
        FeedbackRecord {
            timestamp: at.to_rfc3339_opts(SecondsFormat::Millis, true),
            query: self.query,
            cq_id: self.cq_id,
            event: self.event,
            answer: self.answer,
            useful: self.useful,
        }
    }
}

type WriteJob = (FeedbackRecord, oneshot::Sender<std::io::Result<()>>);

/// Handle to the single task that appends to the feedback log.
#[derive(Debug, Clone)]
pub struct FeedbackWriter {
    tx: mpsc::Sender<WriteJob>,
}

impl FeedbackWriter {
    /// Opens (creating if needed) the log in append mode and starts the writer
    /// task on the current runtime.
    pub async fn open(path: impl AsRef<Path>) -> Result<Self, ServeError> {
        let path = path.as_ref().to_path_buf();
        let mut file = tokio::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .await
            .map_err(|source| ServeError::FeedbackLog { path: path.clone(), source })?;
        let (tx, mut rx) = mpsc::channel::<WriteJob>(256);
        tokio::spawn(async move {
            while let Some((record, ack)) = rx.recv().await {
                let mut line = serde_json::to_vec(&record).expect("record serializes");
                line.push(b'\n');
                let res = async {
                    file.write_all(&line).await?;
                    file.flush().await
                }
                .await;
                let _ = ack.send(res);
            }
        });
        Ok(Self { tx })
    }

    /// Resolves once the line is in the file.
    pub async fn append(&self, record: FeedbackRecord) -> std::io::Result<()> {
        let (ack, done) = oneshot::channel();
        let closed = || std::io::Error::other("feedback writer stopped");
        self.tx.send((record, ack)).await.map_err(|_| closed())?;
        done.await.map_err(|_| closed())?
    }
}

/// Shared, read-only state of the service.
#[derive(Clone)]
pub struct AppState {
    pub ranker: Option<Arc<QuestionRanker>>,
    pub feedback: FeedbackWriter,
    pub catalog_version: String,
}

impl AppState {
    pub fn new(ranker: Option<Arc<QuestionRanker>>, feedback: FeedbackWriter) -> Self {
        Self { ranker, feedback, catalog_version: CATALOG_VERSION.to_string() }
    }
}

#[derive(Debug, Deserialize)]
struct RecommendRequest {
    query: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct RecommendResponse {
    pub recommendation: Option<Recommendation>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

/// Recommendation for one query, or `None` when every score is below 0.5.
pub fn recommend_for(ranker: &QuestionRanker, query: &str) -> Option<Recommendation> {
    let ranking = ScoredRanking::new(ranker.predict(&tokenize(query)));
    top_recommendation(&ranking, ranker.catalog(), SERVING_THRESHOLD)
}

async fn handle_recommend(State(state): State<AppState>, body: Bytes) -> Response {
    let query = match serde_json::from_slice::<RecommendRequest>(&body) {
        Ok(RecommendRequest { query: Some(q) }) if !tokenize(&q).is_empty() => q,
        Ok(_) => return error(StatusCode::BAD_REQUEST, "query is missing or empty"),
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    let Some(ranker) = &state.ranker else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "model not loaded");
    };
    Json(RecommendResponse { recommendation: recommend_for(ranker, &query) }).into_response()
}

async fn handle_feedback(State(state): State<AppState>, body: Bytes) -> Response {
    let req = match serde_json::from_slice::<FeedbackRequest>(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed feedback: {e}")),
    };
    if let Err(msg) = req.validate() {
        return error(StatusCode::BAD_REQUEST, msg);
    }
    match state.feedback.append(req.stamp(Utc::now())).await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => {
            tracing::error!("feedback write failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "could not record feedback")
        }
    }
}

async fn handle_health(State(state): State<AppState>) -> Response {
    Json(json!({ "model_loaded": state.ranker.is_some(), "catalog_version": state.catalog_version })).into_response()
}

pub fn router(state: AppState) -> Router {
    // extension origins are not known ahead of time
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/recommend", post(handle_recommend))
        .route("/feedback", post(handle_feedback))
        .route("/health", get(handle_health))
        .layer(cors)
        .with_state(state)
}

/// Bind address: `QQSE_BIND` (a host, or host:port) if set, else loopback.
pub fn bind_address(port: u16, env_value: Option<&str>) -> Result<SocketAddr, ServeError> {
    let host = env_value.map(str::trim).filter(|v| !v.is_empty()).unwrap_or("127.0.0.1");
    if let Ok(addr) = host.parse::<SocketAddr>() {
        return Ok(addr);
    }
    let bare = host.trim_start_matches('[').trim_end_matches(']');
    bare.parse::<std::net::IpAddr>()
        .map(|ip| SocketAddr::new(ip, port))
        .map_err(|_| ServeError::BadAddress(host.to_string()))
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// Tallies over a feedback log, in the shape of the study's relevance table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSummary {
    /// Interactions (queries with feedback).
    pub total: usize,
    pub not_relevant: usize,
    pub relevant: usize,
    pub useful_yes: usize,
    pub useful_no: usize,
    pub useful_no_answer: usize,
    /// Lines that did not parse as a valid record.
    pub malformed: usize,
}

impl FeedbackSummary {
    pub fn add(&mut self, record: &FeedbackRecord) {
        self.total += 1;
        match record.event {
            FeedbackEvent::NotRelevant => self.not_relevant += 1,
            FeedbackEvent::Updated => match record.useful {
                Some(true) => self.useful_yes += 1,
                Some(false) => self.useful_no += 1,
                None => self.useful_no_answer += 1,
            },
        }
        self.relevant = self.total - self.not_relevant;
    }

    /// relevant / total, or `None` without feedback.
    pub fn relevance_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.relevant as f64 / self.total as f64)
    }

    /// yes / (yes + no); unanswered prompts are excluded.
    pub fn usefulness_rate(&self) -> Option<f64> {
        let answered = self.useful_yes + self.useful_no;
        (answered > 0).then(|| self.useful_yes as f64 / answered as f64)
    }
}

fn parse_line(line: &str) -> Option<FeedbackRecord> {
    let record: FeedbackRecord = serde_json::from_str(line).ok()?;
    let check = FeedbackRequest {
        query: record.query.clone(),
        cq_id: record.cq_id,
        event: record.event,
        answer: record.answer.clone(),
        useful: record.useful,
    };
    check.validate().ok()?;
    DateTime::parse_from_rfc3339(&record.timestamp).ok()?;
    Some(record)
}

/// Reads a feedback log; blank lines are ignored and malformed ones counted.
pub fn summarize_feedback(reader: impl BufRead) -> std::io::Result<FeedbackSummary> {
    let mut summary = FeedbackSummary::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Some(r) => summary.add(&r),
            None => summary.malformed += 1,
        }
    }
    if summary.malformed > 0 {
        tracing::warn!("skipped {} malformed feedback lines", summary.malformed);
    }
    Ok(summary)
}

pub fn feedback_summary(path: impl AsRef<Path>) -> std::io::Result<FeedbackSummary> {
    summarize_feedback(BufReader::new(std::fs::File::open(path)?))
}
