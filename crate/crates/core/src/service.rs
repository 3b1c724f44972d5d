//! Local HTTP JSON API for triaging an audit report.
//!
//! | method | path              | body / query            |
//! |--------|-------------------|-------------------------|
//! | GET    | `/api/report`     | `offset`, `limit`       |
//! | GET    | `/api/node/{id}`  |                         |
//! | POST   | `/api/verdict`    | one verdict object      |
//! | GET    | `/api/progress`   |                         |
//! | GET    | `/api/export`     |                         |
//!
//! Verdicts are appended to the log before the in-memory state changes, so
//! a failed write leaves both untouched.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, FixedOffset, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::audit::{AuditReport, NodeRecord};
use crate::base::SoftmaxMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::review::{append_verdict, export_clean, EffectiveVerdicts, Verdict, VerdictEntry};

pub const API_SCHEMA: u32 = 1;
const DEFAULT_PAGE: usize = 50;

pub struct ReviewSession {
    report: AuditReport,
    graph: Graph,
    softmax: Option<SoftmaxMatrix>,
    log_path: PathBuf,
    record_index: HashMap<usize, usize>,
    verdicts: RwLock<EffectiveVerdicts>,
    writer: Mutex<()>,
}

impl ReviewSession {
    /// Loads existing verdicts from `log_path` (absent means none yet).
    pub fn new(
        report: AuditReport,
        graph: Graph,
        softmax: Option<SoftmaxMatrix>,
        log_path: PathBuf,
    ) -> Result<Self> {
        if report.num_nodes != graph.num_nodes() || report.num_classes != graph.num_classes() {
            return Err(Error::InvalidData(format!(
                "report covers {} nodes / {} classes but the graph has {} / {}",
                report.num_nodes,
                report.num_classes,
                graph.num_nodes(),
                graph.num_classes()
            )));
        }
        if let Some(p) = &softmax {
            if p.num_nodes() != graph.num_nodes() || p.num_classes() != graph.num_classes() {
                return Err(Error::dimension(
                    "review session (softmax)",
                    format!("{} x {}", graph.num_nodes(), graph.num_classes()),
                    format!("{} x {}", p.num_nodes(), p.num_classes()),
                ));
            }
        }
        let verdicts = EffectiveVerdicts::load(&log_path)?;
        let record_index = report
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.node_id, i))
            .collect();
        Ok(Self {
            report,
            graph,
            softmax,
            log_path,
            record_index,
            verdicts: RwLock::new(verdicts),
            writer: Mutex::new(()),
        })
    }

    fn snapshot(&self) -> EffectiveVerdicts {
        self.verdicts.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Validates, appends to the log, then updates the effective state.
    pub fn submit(&self, entry: VerdictEntry) -> Result<VerdictEntry> {
        entry.validate(&self.report)?;
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        append_verdict(&self.log_path, &entry)?;
        self.verdicts
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .apply(entry.clone());
        Ok(entry)
    }
}

#[derive(Debug, Serialize)]
struct RecordView<'a> {
    #[serde(flatten)]
    record: &'a NodeRecord,
    verdict: Option<VerdictEntry>,
}

#[derive(Debug, Deserialize)]
struct Page {
    offset: Option<usize>,
    limit: Option<usize>,
}

/// Verdict as posted; the server fills in a missing timestamp.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictRequest {
    node_id: usize,
    verdict: Verdict,
    #[serde(default)]
    corrected_label: Option<usize>,
    reviewer: String,
    #[serde(default)]
    timestamp: Option<DateTime<FixedOffset>>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type Shared = State<Arc<ReviewSession>>;

pub fn router(session: Arc<ReviewSession>) -> Router {
    Router::new()
        .route("/api/report", get(report))
        .route("/api/node/{id}", get(node))
        .route("/api/verdict", post(verdict))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(session)
}

async fn report(State(s): Shared, Query(page): Query<Page>) -> Json<serde_json::Value> {
    let verdicts = s.snapshot();
    let total = s.report.records.len();
    let offset = page.offset.unwrap_or(0).min(total);
    let limit = page.limit.unwrap_or(DEFAULT_PAGE);
    let records: Vec<RecordView> = s.report.records[offset..]
        .iter()
        .take(limit)
        .map(|r| RecordView {
            record: r,
            verdict: verdicts.get(r.node_id).cloned(),
        })
        .collect();
    Json(json!({
        "schema": API_SCHEMA,
        "dataset": s.report.dataset,
        "num_classes": s.report.num_classes,
        "threshold": s.report.config.threshold,
        "total": total,
        "offset": offset,
        "limit": limit,
        "records": records,
    }))
}

async fn node(State(s): Shared, UrlPath(id): UrlPath<String>) -> std::result::Result<Json<serde_json::Value>, ApiError> {
    let not_found = || ApiError(StatusCode::NOT_FOUND, format!("no audit record for node `{id}`"));
    let v: usize = id.parse().map_err(|_| not_found())?;
    let &idx = s.record_index.get(&v).ok_or_else(not_found)?;
    let record = &s.report.records[idx];
    let verdicts = s.snapshot();
    let probs = |u: usize| s.softmax.as_ref().map(|p| p.row(u).to_vec());
    let hops: Vec<serde_json::Value> = s
        .graph
        .hop_rings(v, s.report.config.k_hops)
        .into_iter()
        .enumerate()
        .map(|(i, ring)| {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            let neighbors: Vec<serde_json::Value> = ring
                .iter()
                .map(|&u| {
                    let label = s.graph.label(u);
                    let key = label.map_or_else(|| "excluded".to_string(), |l| l.to_string());
                    *counts.entry(key).or_default() += 1;
                    json!({ "node_id": u, "label": label, "probabilities": probs(u) })
                })
                .collect();
            json!({ "hop": i + 1, "label_counts": counts, "neighbors": neighbors })
        })
        .collect();
    Ok(Json(json!({
        "schema": API_SCHEMA,
        "record": record,
        "given_label": record.given_label,
        "suggested_label": record.suggested_label,
        "probabilities": probs(v),
        "verdict": verdicts.get(v),
        "hops": hops,
    })))
}

async fn verdict(State(s): Shared, body: String) -> std::result::Result<Json<serde_json::Value>, ApiError> {
    let req: VerdictRequest = serde_json::from_str(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed verdict: {e}")))?;
    if !s.record_index.contains_key(&req.node_id) {
        return Err(ApiError(
            StatusCode::NOT_FOUND,
            format!("no audit record for node `{}`", req.node_id),
        ));
    }
    let entry = VerdictEntry {
        node_id: req.node_id,
        verdict: req.verdict,
        corrected_label: req.corrected_label,
        reviewer: req.reviewer,
        timestamp: req.timestamp.unwrap_or_else(|| Utc::now().fixed_offset()),
    };
    let s2 = s.clone();
    let saved = tokio::task::spawn_blocking(move || s2.submit(entry))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(json!({ "ok": true, "entry": saved })))
}

async fn progress(State(s): Shared) -> Json<serde_json::Value> {
    let verdicts = s.snapshot();
    let counts: BTreeMap<&str, usize> = verdicts
        .counts()
        .into_iter()
        .map(|(v, n)| (v.as_str(), n))
        .collect();
    Json(json!({
        "schema": API_SCHEMA,
        "total": s.report.records.len(),
        "flagged": s.report.num_flagged(),
        "reviewed": verdicts.len(),
        "counts": counts,
    }))
}

async fn export(State(s): Shared) -> std::result::Result<Json<serde_json::Value>, ApiError> {
    let verdicts = s.snapshot();
    let cleaned = export_clean(s.graph.labels(), s.graph.splits(), s.graph.num_classes(), &verdicts)?;
    Ok(Json(json!({
        "schema": API_SCHEMA,
        "labels_csv": cleaned.labels_csv(),
        "splits_csv": cleaned.splits_csv(),
        "replaced": cleaned.replaced,
        "excluded": cleaned.excluded,
    })))
}

/// Serves until the process is stopped.
pub async fn serve(session: Arc<ReviewSession>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("tcp://{addr}"), e))?;
    log::info!("review service listening on http://{addr}");
    axum::serve(listener, router(session))
        .await
        .map_err(|e| Error::io(format!("tcp://{addr}"), e))
}
