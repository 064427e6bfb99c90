//! Review service over a run directory: a prioritized queue of file
//! reports and an append-only journal of reviewer verdicts.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::prescreen::PreScreenFinding;
use crate::reportjson::{band_of, AnalysisReport, Band, Scale};
use crate::workflow::{read_run, ArtifactError, FileAnalysis, FileOutcome, StageOutput};

pub const JOURNAL_FILE: &str = "verdicts_reviewed.jsonl";

/// Default `min_malware` of the queue.
pub const DEFAULT_MIN_MALWARE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewerVerdict {
    Malicious,
    Benign,
    Unsure,
}

/// One reviewable file report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewItem {
    pub id: String,
    pub package: String,
    pub version: String,
    pub file_path: String,
    /// `completed`, `skipped` or `failed`.
    pub status: &'static str,
    pub final_report: Option<AnalysisReport>,
    pub degraded: bool,
    pub triage_priority: f64,
    pub reviewer_verdict: Option<ReviewerVerdict>,
    pub reviewed_at: Option<String>,
}

/// Stable id of a file within a run.
pub fn item_id(package: &str, version: &str, file_path: &str) -> String {
    let digest = Sha256::digest(format!("{package}@{version}/{file_path}").as_bytes());
    hex::encode(digest)[..12].to_string()
}

#[derive(Debug, Clone)]
struct Entry {
    item: ReviewItem,
    analysis: FileAnalysis,
    package_malicious: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JournalLine {
    id: String,
    verdict: ReviewerVerdict,
    reviewed_at: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Run(#[from] ArtifactError),
    #[error("cannot use review journal {path}: {source}")]
    Journal {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("review journal {path} line {line} is malformed")]
    BadJournal { path: PathBuf, line: usize },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// Queue state of a run plus the persisted verdicts.
#[derive(Debug)]
pub struct ReviewStore {
    /// Sorted by priority descending, then id.
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    verdicts: Mutex<HashMap<String, (ReviewerVerdict, String)>>,
    journal: PathBuf,
}

impl ReviewStore {
    /// Loads the run in `dir` and replays its verdict journal, last write
    /// winning.
    pub fn open(dir: &Path) -> Result<ReviewStore, ServeError> {
        let run = read_run(dir)?;
        let mut entries = Vec::new();
        for v in &run.verdicts {
            for a in &v.file_analyses {
                let (status, report, degraded) = match &a.outcome {
                    FileOutcome::Completed { final_report, degraded } => ("completed", Some(final_report.clone()), *degraded),
                    FileOutcome::Skipped { .. } => ("skipped", None, false),
                    FileOutcome::Failed { .. } => ("failed", None, false),
                    FileOutcome::NotSelected => continue,
                };
                entries.push(Entry {
                    item: ReviewItem {
                        id: item_id(&v.name, &v.version, &a.file_path),
                        package: v.name.clone(),
                        version: v.version.clone(),
                        file_path: a.file_path.clone(),
                        status,
                        triage_priority: report.as_ref().map_or(0.0, |r| r.malware),
                        final_report: report,
                        degraded,
                        reviewer_verdict: None,
                        reviewed_at: None,
                    },
                    analysis: a.clone(),
                    package_malicious: v.is_malicious,
                });
            }
        }
        entries.sort_by(|a, b| {
            b.item
                .triage_priority
                .total_cmp(&a.item.triage_priority)
                .then_with(|| a.item.id.cmp(&b.item.id))
        });
        let index = entries.iter().enumerate().map(|(i, e)| (e.item.id.clone(), i)).collect();

        let journal = dir.join(JOURNAL_FILE);
        let mut verdicts = HashMap::new();
        if journal.exists() {
            let text = std::fs::read_to_string(&journal).map_err(|source| ServeError::Journal {
                path: journal.clone(),
                source,
            })?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let rec: JournalLine = serde_json::from_str(line).map_err(|_| ServeError::BadJournal {
                    path: journal.clone(),
                    line: i + 1,
                })?;
                verdicts.insert(rec.id, (rec.verdict, rec.reviewed_at));
            }
        }
        Ok(ReviewStore {
            entries,
            index,
            verdicts: Mutex::new(verdicts),
            journal,
        })
    }

    fn with_verdict(&self, e: &Entry, verdicts: &HashMap<String, (ReviewerVerdict, String)>) -> ReviewItem {
        let mut item = e.item.clone();
        if let Some((v, at)) = verdicts.get(&item.id) {
            item.reviewer_verdict = Some(*v);
            item.reviewed_at = Some(at.clone());
        }
        item
    }

    /// Items with malware at least `min_malware`, optionally filtered by
    /// review status, in queue order.
    pub fn queue(&self, min_malware: f64, status: Option<StatusFilter>) -> Vec<ReviewItem> {
        let verdicts = self.verdicts.lock().unwrap();
        self.entries
            .iter()
            .filter(|e| e.item.triage_priority >= min_malware)
            .map(|e| self.with_verdict(e, &verdicts))
            .filter(|item| status.is_none_or(|s| s.matches(item.reviewer_verdict)))
            .collect()
    }

    pub fn item(&self, id: &str) -> Option<ItemDetail> {
        let e = &self.entries[*self.index.get(id)?];
        let verdicts = self.verdicts.lock().unwrap();
        Some(ItemDetail {
            item: self.with_verdict(e, &verdicts),
            package_malicious: e.package_malicious,
            attempts: e.analysis.attempts,
            outcome: e.analysis.outcome.clone(),
            findings: e.analysis.findings.clone(),
            stage1: e.analysis.stage1.clone(),
            stage2: e.analysis.stage2.clone(),
            stage3: e.analysis.stage3.clone(),
            file_excerpt: e.analysis.file_excerpt.clone(),
        })
    }

    /// Records a verdict. Refuses to replace an existing one unless
    /// `overwrite` is set.
    pub fn submit(&self, id: &str, verdict: ReviewerVerdict, overwrite: bool) -> Result<ReviewItem, SubmitError> {
        let idx = *self.index.get(id).ok_or(SubmitError::UnknownId)?;
        let mut verdicts = self.verdicts.lock().unwrap();
        if verdicts.contains_key(id) && !overwrite {
            return Err(SubmitError::AlreadyReviewed);
        }
        let line = JournalLine {
            id: id.to_string(),
            verdict,
            reviewed_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.journal)
            .map_err(SubmitError::Io)?;
        let mut text = serde_json::to_string(&line).expect("journal line is serializable");
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(SubmitError::Io)?;
        f.sync_data().map_err(SubmitError::Io)?;
        verdicts.insert(line.id, (verdict, line.reviewed_at));
        Ok(self.with_verdict(&self.entries[idx], &verdicts))
    }

    pub fn summary(&self) -> Summary {
        let verdicts = self.verdicts.lock().unwrap();
        let mut s = Summary {
            total: self.entries.len(),
            reviewed: verdicts.len(),
            ..Summary::default()
        };
        for scale in [Scale::Malware, Scale::SecurityRisk] {
            let counts = match scale {
                Scale::Malware => &mut s.malware,
                Scale::SecurityRisk => &mut s.security_risk,
            };
            for label in Band::labels(scale) {
                counts.insert(label.to_string(), 0);
            }
        }
        for e in &self.entries {
            match &e.item.final_report {
                Some(r) => {
                    for (scale, score) in [(Scale::Malware, r.malware), (Scale::SecurityRisk, r.security_risk)] {
                        if let Ok(band) = band_of(score, scale) {
                            let counts = match scale {
                                Scale::Malware => &mut s.malware,
                                Scale::SecurityRisk => &mut s.security_risk,
                            };
                            *counts.entry(band.label.to_string()).or_default() += 1;
                        }
                    }
                }
                None => s.unscored += 1,
            }
        }
        for (v, _) in verdicts.values() {
            *s.verdicts.entry(*v).or_default() += 1;
        }
        s
    }
}

#[derive(Debug)]
pub enum SubmitError {
    UnknownId,
    AlreadyReviewed,
    Io(std::io::Error),
}

/// Review-status filter of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusFilter {
    Pending,
    Reviewed,
    Verdict(ReviewerVerdict),
}

impl StatusFilter {
    pub fn parse(s: &str) -> Option<StatusFilter> {
        Some(match s {
            "pending" => StatusFilter::Pending,
            "reviewed" => StatusFilter::Reviewed,
            "malicious" => StatusFilter::Verdict(ReviewerVerdict::Malicious),
            "benign" => StatusFilter::Verdict(ReviewerVerdict::Benign),
            "unsure" => StatusFilter::Verdict(ReviewerVerdict::Unsure),
            _ => return None,
        })
    }

    fn matches(self, v: Option<ReviewerVerdict>) -> bool {
        match self {
            StatusFilter::Pending => v.is_none(),
            StatusFilter::Reviewed => v.is_some(),
            StatusFilter::Verdict(want) => v == Some(want),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemDetail {
    #[serde(flatten)]
    pub item: ReviewItem,
    pub package_malicious: bool,
    pub attempts: u32,
    pub outcome: FileOutcome,
    pub findings: Vec<PreScreenFinding>,
    pub stage1: Vec<StageOutput>,
    pub stage2: Vec<StageOutput>,
    pub stage3: Option<StageOutput>,
    pub file_excerpt: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub reviewed: usize,
    /// Items without a final report.
    pub unscored: usize,
    pub malware: BTreeMap<String, usize>,
    pub security_risk: BTreeMap<String, usize>,
    pub verdicts: BTreeMap<ReviewerVerdict, usize>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct QueueParams {
    min_malware: Option<f64>,
    status: Option<String>,
}

async fn queue(State(store): State<Arc<ReviewStore>>, Query(p): Query<QueueParams>) -> Response {
    let min = p.min_malware.unwrap_or(DEFAULT_MIN_MALWARE);
    if !(0.0..=1.0).contains(&min) {
        return error(StatusCode::BAD_REQUEST, "min_malware must be within [0, 1]");
    }
    let status = match p.status.as_deref().filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => match StatusFilter::parse(s) {
            Some(f) => Some(f),
            None => {
                return error(
                    StatusCode::BAD_REQUEST,
                    "status must be pending, reviewed, malicious, benign or unsure",
                )
            }
        },
    };
    Json(store.queue(min, status)).into_response()
}

async fn item(State(store): State<Arc<ReviewStore>>, UrlPath(id): UrlPath<String>) -> Response {
    match store.item(&id) {
        Some(detail) => Json(detail).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown item {id}")),
    }
}

#[derive(Deserialize)]
struct VerdictBody {
    id: String,
    verdict: ReviewerVerdict,
}

#[derive(Deserialize)]
struct VerdictParams {
    #[serde(default)]
    overwrite: bool,
}

async fn verdict(
    State(store): State<Arc<ReviewStore>>,
    Query(p): Query<VerdictParams>,
    Json(body): Json<VerdictBody>,
) -> Response {
    match store.submit(&body.id, body.verdict, p.overwrite) {
        Ok(item) => Json(item).into_response(),
        Err(SubmitError::UnknownId) => error(StatusCode::NOT_FOUND, format!("unknown item {}", body.id)),
        Err(SubmitError::AlreadyReviewed) => error(
            StatusCode::CONFLICT,
            "item already has a verdict; resend with ?overwrite=true to replace it",
        ),
        Err(SubmitError::Io(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn summary(State(store): State<Arc<ReviewStore>>) -> Response {
    Json(store.summary()).into_response()
}

/// The HTTP routes, with static files from `ui_dir` at `/` when given.
pub fn router(store: Arc<ReviewStore>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/item/{id}", get(item))
        .route("/api/verdict", post(verdict))
        .route("/api/summary", get(summary))
        .with_state(store);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Serves `run_dir` until interrupted.
pub fn serve(run_dir: &Path, addr: SocketAddr, ui_dir: Option<&Path>) -> Result<(), ServeError> {
    let store = Arc::new(ReviewStore::open(run_dir)?);
    let app = router(store, ui_dir);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|source| ServeError::Bind { addr, source })?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| ServeError::Bind { addr, source })?;
        eprintln!("serving {} on http://{}", run_dir.display(), listener.local_addr().unwrap_or(addr));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|source| ServeError::Bind { addr, source })
    })
}
