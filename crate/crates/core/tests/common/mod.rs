//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;
use tower::ServiceExt;

use qqse_core::catalog::Catalog;
use qqse_core::model::{HyperParams, ModelWeights, QuestionRanker};
use qqse_core::serve::{router, AppState, FeedbackWriter};
use qqse_core::EmbeddingTable;

/// Tiny deterministic table covering a handful of query words.
pub fn fixture_table() -> EmbeddingTable {
    let words = ["java", "mail", "api", "python", "windows10", "download", "eclipse", "error"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    EmbeddingTable::from_entries(words.iter().map(|w| (*w, (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect())))
        .unwrap()
}

/// A model whose every score is `p`: zero weights plus an output bias.
pub fn constant_weights(table: &EmbeddingTable, p: f64) -> ModelWeights<f32> {
    let mut w = ModelWeights::<f32>::zeros(&HyperParams::default(), table.dimension(), table.fingerprint());
    w.head_out.bias = vec![(p / (1.0 - p)).ln() as f32];
    w
}

pub fn constant_ranker(p: f64) -> QuestionRanker {
    let table = fixture_table();
    let w = constant_weights(&table, p);
    QuestionRanker::new(w, Arc::new(table), Catalog::shipped()).unwrap()
}

pub async fn app(ranker: Option<QuestionRanker>, log: &Path) -> Router {
    let writer = FeedbackWriter::open(log).await.unwrap();
    router(AppState::new(ranker.map(Arc::new), writer))
}

pub async fn call(app: &Router, method: &str, path: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(path);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

#[derive(Debug, Deserialize)]
pub struct WireCase {
    pub name: String,
    /// "half" (every score 0.5), "low" (every score 0.3) or "none".
    pub model: String,
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub body: Option<Value>,
    /// Sent verbatim instead of `body`.
    #[serde(default)]
    pub raw: Option<String>,
    pub status: u16,
    /// Exact JSON response; error responses only need an `error` string.
    #[serde(default)]
    pub response: Option<Value>,
    /// Feedback log lines expected afterwards, timestamps removed.
    #[serde(default)]
    pub log: Vec<Value>,
}

pub fn wire_cases() -> Vec<WireCase> {
    serde_json::from_str(include_str!("../fixtures/wire.json")).unwrap()
}

/// Runs one golden case against a fresh service; `Err` describes the mismatch.
pub async fn run_wire_case(case: &WireCase) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let ranker = match case.model.as_str() {
        "half" => Some(constant_ranker(0.5)),
        "low" => Some(constant_ranker(0.3)),
        _ => None,
    };
    let app = app(ranker, &log).await;
    let body = case.raw.clone().or_else(|| case.body.as_ref().map(Value::to_string));
    let (status, bytes) = call(&app, &case.method, &case.path, body).await;
    let fail = |msg: String| Err(format!("{}: {msg}", case.name));
    if status.as_u16() != case.status {
        return fail(format!("status {} != {}", status.as_u16(), case.status));
    }
    if status == StatusCode::NO_CONTENT {
        if !bytes.is_empty() {
            return fail("204 with a body".into());
        }
    } else {
        let got: Value = match serde_json::from_slice(&bytes) {
            Ok(v) => v,
            Err(e) => return fail(format!("response is not JSON: {e}")),
        };
        match &case.response {
            Some(expected) if &got != expected => return fail(format!("response {got} != {expected}")),
            None if !got["error"].is_string() => return fail(format!("expected an error body, got {got}")),
            _ => {}
        }
    }
    let text = std::fs::read_to_string(&log).unwrap_or_default();
    let mut lines = Vec::new();
    for line in text.lines() {
        let mut v: Value = serde_json::from_str(line).map_err(|e| format!("{}: bad log line {line}: {e}", case.name))?;
        let ts = v.as_object_mut().and_then(|o| o.remove("timestamp"));
        match ts.as_ref().and_then(Value::as_str).map(chrono::DateTime::parse_from_rfc3339) {
            Some(Ok(_)) => {}
            _ => return fail(format!("log line without an RFC3339 timestamp: {line}")),
        }
        lines.push(v);
    }
    if lines != case.log {
        return fail(format!("log {lines:?} != {:?}", case.log));
    }
    Ok(())
}

/// Random ranking fixture: a permutation of 1..=16 and a relevant subset
/// (sometimes empty).
pub fn random_fixture(rng: &mut ChaCha8Rng) -> (Vec<u8>, BTreeSet<u8>) {
    let mut ranked: Vec<u8> = (1..=16).collect();
    ranked.shuffle(rng);
    let k = if rng.random_bool(0.1) { 0 } else { rng.random_range(1..=6) };
    let mut pool: Vec<u8> = (1..=16).collect();
    pool.shuffle(rng);
    (ranked, pool[..k].iter().copied().collect())
}

// Brute-force metric oracles, written straight from the definitions.

pub fn oracle_rr(ranked: &[u8], relevant: &BTreeSet<u8>) -> f64 {
    for pos in 1..=ranked.len() {
        if relevant.contains(&ranked[pos - 1]) {
            return 1.0 / pos as f64;
        }
    }
    0.0
}

pub fn oracle_avgp(ranked: &[u8], relevant: &BTreeSet<u8>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for r in relevant {
        let rank = ranked.iter().position(|x| x == r).unwrap() + 1;
        let at_or_above = relevant.iter().filter(|o| ranked.iter().position(|x| x == *o).unwrap() < rank).count();
        total += at_or_above as f64 / rank as f64;
    }
    total / relevant.len() as f64
}

pub fn oracle_pk(ranked: &[u8], relevant: &BTreeSet<u8>, k: usize) -> f64 {
    let mut hits = 0;
    for id in relevant {
        if ranked[..k].contains(id) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}
