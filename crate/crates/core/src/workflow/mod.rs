//! The three-stage analysis of each file, package rollup and the batch
//! pipeline over a dataset.

mod artifacts;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, ManifestEntry, PackageArtifact, SourceFile};
use crate::llmclient::{ChatRequest, LlmClient};
use crate::prescreen::{scan_file, PreScreenFinding, RuleSet};
use crate::prompts::{
    budget_fit, render_critique, render_final, render_initial, Profile, PromptBundle, PromptError,
    SkipReason, Stage, TruncationPolicy,
};
use crate::reportjson::{parse_report, AnalysisReport, RepairKind};
use crate::tokens::{CharsPerToken, TokenEstimator};

pub use artifacts::{
    read_run, read_verdicts, write_run, ArtifactError, RunArtifacts, RunMeta, LEDGER_FILE, META_FILE, VERDICTS_FILE,
};

/// Default package-level malware threshold. A package is malicious when its
/// highest file score is strictly above it.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Maximum workflow attempts per file: the first pass plus one full retry
/// when the final report is unusable.
pub const MAX_FILE_ATTEMPTS: u32 = 2;

const EXCERPT_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every file goes through the model stages.
    #[default]
    Full,
    /// Only files flagged by the static rules do.
    Prescreened,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "full" => Ok(Mode::Full),
            "prescreened" => Ok(Mode::Prescreened),
            other => Err(format!("unknown mode `{other}` (expected full or prescreened)")),
        }
    }
}

/// One model completion and what the parser made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<AnalysisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl StageOutput {
    fn from_raw(raw: String) -> StageOutput {
        match parse_report(&raw) {
            Ok(report) => StageOutput {
                raw,
                report: Some(report),
                parse_error: None,
            },
            Err(e) => StageOutput {
                raw,
                report: None,
                parse_error: Some(e.kind.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FileOutcome {
    /// A final report exists. `degraded` marks a report that was still
    /// unusable after the retry and was replaced by the best earlier one.
    Completed {
        final_report: AnalysisReport,
        degraded: bool,
    },
    Skipped {
        #[serde(flatten)]
        reason: SkipReason,
    },
    /// The prescreened mode did not send this file to the model.
    NotSelected,
    Failed {
        error: String,
        retryable: bool,
    },
}

/// Full record of one file's analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileAnalysis {
    pub file_path: String,
    pub outcome: FileOutcome,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<PreScreenFinding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage1: Vec<StageOutput>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage2: Vec<StageOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage3: Option<StageOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    /// Leading part of the file, for reviewers.
    pub file_excerpt: String,
}

impl FileAnalysis {
    fn new(file: &SourceFile, findings: Vec<PreScreenFinding>, outcome: FileOutcome) -> FileAnalysis {
        FileAnalysis {
            file_path: file.path.clone(),
            outcome,
            attempts: 0,
            findings,
            stage1: Vec::new(),
            stage2: Vec::new(),
            stage3: None,
            truncated: None,
            file_excerpt: excerpt_of(&file.content),
        }
    }

    pub fn final_report(&self) -> Option<&AnalysisReport> {
        match &self.outcome {
            FileOutcome::Completed { final_report, .. } => Some(final_report),
            _ => None,
        }
    }
}

fn excerpt_of(content: &str) -> String {
    if content.len() <= EXCERPT_BYTES {
        return content.to_string();
    }
    let mut end = EXCERPT_BYTES;
    while !content.is_char_boundary(end) {
        end -= 1;
    }
    content[..end].to_string()
}

/// What the analysis of one file needs besides the file.
pub struct AnalysisContext<'a> {
    pub client: &'a LlmClient,
    pub profile: &'a Profile,
    pub policy: TruncationPolicy,
    pub estimator: &'a dyn TokenEstimator,
}

enum Pass {
    Done(FileOutcome),
    /// The final report was unusable; carries the best fallback so far.
    Degraded(Option<AnalysisReport>),
}

impl AnalysisContext<'_> {
    fn request(&self, bundle: &PromptBundle, stage: Stage, attempt: u32) -> ChatRequest {
        let cfg = self.profile.stages.get(stage);
        ChatRequest {
            model_id: self.profile.model.model_id.clone(),
            system_text: bundle.system_text.clone(),
            user_text: bundle.user_text.clone(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            n: cfg.n_reports,
            attempt,
        }
    }

    // Err is only ever Skipped or Failed, never the large Completed variant.
    #[allow(clippy::result_large_err)]
    fn fit(&self, bundle: Result<PromptBundle, PromptError>) -> Result<PromptBundle, FileOutcome> {
        bundle
            .and_then(|b| budget_fit(b, &self.profile.model, self.policy, self.estimator))
            .map_err(|e| match e {
                PromptError::Skip(reason) => FileOutcome::Skipped { reason },
                other => FileOutcome::Failed {
                    error: other.to_string(),
                    retryable: false,
                },
            })
    }

    #[allow(clippy::result_large_err)]
    fn call(&self, bundle: &PromptBundle, stage: Stage, attempt: u32) -> Result<Vec<StageOutput>, FileOutcome> {
        self.client
            .complete(&self.request(bundle, stage, attempt))
            .map(|resp| resp.texts.into_iter().map(StageOutput::from_raw).collect())
            .map_err(|e| FileOutcome::Failed {
                error: e.to_string(),
                retryable: e.is_retryable(),
            })
    }

    fn pass(&self, file: &SourceFile, attempt: u32, out: &mut FileAnalysis) -> Pass {
        macro_rules! tri {
            ($e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(outcome) => return Pass::Done(outcome),
                }
            };
        }
        let initial = tri!(self.fit(render_initial(file)));
        out.truncated = Some(initial.is_truncated());
        out.stage1 = tri!(self.call(&initial, Stage::Initial, attempt));
        let forwarded = forwardable(&out.stage1);
        if forwarded.is_empty() {
            return Pass::Degraded(None);
        }

        let critique = tri!(self.fit(render_critique(file, &forwarded)));
        out.stage2 = tri!(self.call(&critique, Stage::Critique, attempt));
        let mut reviewed = forwardable(&out.stage2);
        if reviewed.is_empty() {
            reviewed = forwarded;
        }
        let fallback = most_confident(&out.stage2).or_else(|| most_confident(&out.stage1));

        let fin = tri!(self.fit(render_final(file, &reviewed)));
        let mut outputs = tri!(self.call(&fin, Stage::Final, attempt));
        let final_out = if outputs.is_empty() {
            None
        } else {
            Some(outputs.swap_remove(0))
        };
        out.stage3 = final_out.clone();
        match final_out.and_then(|o| o.report) {
            Some(r) if !r.has_violation(RepairKind::PlaceholderText) => Pass::Done(FileOutcome::Completed {
                final_report: r,
                degraded: false,
            }),
            _ => Pass::Degraded(fallback),
        }
    }
}

/// Raw text of the outputs that parsed, the input of the next stage.
/// Unparseable outputs are kept in the record but not forwarded.
fn forwardable(outputs: &[StageOutput]) -> Vec<String> {
    outputs
        .iter()
        .filter(|o| o.report.is_some())
        .map(|o| o.raw.clone())
        .collect()
}

fn most_confident(outputs: &[StageOutput]) -> Option<AnalysisReport> {
    outputs
        .iter()
        .filter_map(|o| o.report.as_ref())
        .filter(|r| !r.has_violation(RepairKind::PlaceholderText))
        .fold(None::<&AnalysisReport>, |best, r| match best {
            Some(b) if b.confidence >= r.confidence => Some(b),
            _ => Some(r),
        })
        .cloned()
}

/// Runs the initial, critique and final stages on one file. An unusable
/// final report triggers one full retry; if that also fails the most
/// confident earlier report stands in, marked degraded.
pub fn analyze_file(ctx: &AnalysisContext<'_>, file: &SourceFile, findings: Vec<PreScreenFinding>) -> FileAnalysis {
    let mut out = FileAnalysis::new(file, findings, FileOutcome::NotSelected);
    let mut fallback = None;
    for attempt in 1..=MAX_FILE_ATTEMPTS {
        out.attempts = attempt;
        match ctx.pass(file, attempt, &mut out) {
            Pass::Done(outcome) => {
                out.outcome = outcome;
                return out;
            }
            Pass::Degraded(fb) => fallback = fb.or(fallback),
        }
    }
    out.outcome = match fallback {
        Some(final_report) => FileOutcome::Completed {
            final_report,
            degraded: true,
        },
        None => FileOutcome::Failed {
            error: "no parseable report after retry".into(),
            retryable: false,
        },
    };
    out
}

/// Package-level result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageVerdict {
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    pub file_analyses: Vec<FileAnalysis>,
    pub max_malware_score: f64,
    pub max_security_risk: f64,
    pub is_malicious: bool,
    /// Review priority; higher first.
    pub triage_priority: f64,
    /// Some file was skipped or failed, so the verdict may understate risk.
    pub incomplete: bool,
}

impl PackageVerdict {
    pub fn id(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }
}

/// Aggregates file analyses with the default threshold.
pub fn rollup(pkg: &PackageArtifact, analyses: Vec<FileAnalysis>) -> PackageVerdict {
    rollup_with_threshold(pkg, analyses, DEFAULT_THRESHOLD)
}

/// Aggregates file analyses: maximum scores over completed files, malicious
/// when the maximum malware score is strictly above `threshold`.
pub fn rollup_with_threshold(pkg: &PackageArtifact, analyses: Vec<FileAnalysis>, threshold: f64) -> PackageVerdict {
    let (mut malware, mut risk) = (0.0f64, 0.0f64);
    let mut incomplete = false;
    for a in &analyses {
        match &a.outcome {
            FileOutcome::Completed { final_report, .. } => {
                malware = malware.max(final_report.malware);
                risk = risk.max(final_report.security_risk);
            }
            FileOutcome::Skipped { .. } | FileOutcome::Failed { .. } => incomplete = true,
            FileOutcome::NotSelected => {}
        }
    }
    PackageVerdict {
        name: pkg.name.clone(),
        version: pkg.version.clone(),
        label: pkg.label,
        file_analyses: analyses,
        max_malware_score: malware,
        max_security_risk: risk,
        is_malicious: malware > threshold,
        triage_priority: malware,
        incomplete,
    }
}

/// Sorts verdicts for review: malware score, then security risk, both
/// descending, then name and version.
pub fn triage_order(verdicts: &mut [PackageVerdict]) {
    verdicts.sort_by(|a, b| {
        b.max_malware_score
            .total_cmp(&a.max_malware_score)
            .then(b.max_security_risk.total_cmp(&a.max_security_risk))
            .then_with(|| a.name.cmp(&b.name))
            .then_with(|| a.version.cmp(&b.version))
    });
}

/// Pipeline settings.
pub struct PipelineConfig {
    pub profile: Profile,
    pub mode: Mode,
    pub rules: RuleSet,
    pub policy: TruncationPolicy,
    pub threshold: f64,
    /// Number of worker threads; at least 1.
    pub parallelism: usize,
    pub estimator: Arc<dyn TokenEstimator>,
}

impl PipelineConfig {
    pub fn new(profile: Profile, mode: Mode) -> PipelineConfig {
        PipelineConfig {
            profile,
            mode,
            rules: RuleSet::builtin(),
            policy: TruncationPolicy::default(),
            threshold: DEFAULT_THRESHOLD,
            parallelism: 4,
            estimator: Arc::new(CharsPerToken::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    pub packages_total: usize,
    pub packages_failed_to_load: usize,
    pub packages_malicious: usize,
    /// Equals analyzed + skipped + not_selected + failed.
    pub files_total: usize,
    pub files_flagged: usize,
    pub files_analyzed: usize,
    pub files_degraded: usize,
    pub files_skipped: usize,
    pub files_not_selected: usize,
    pub files_failed: usize,
}

impl RunCounters {
    pub fn is_consistent(&self) -> bool {
        self.files_total == self.files_analyzed + self.files_skipped + self.files_not_selected + self.files_failed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// One verdict per loaded package, in input order.
    pub verdicts: Vec<PackageVerdict>,
    pub load_failures: Vec<LoadFailure>,
    pub counters: RunCounters,
}

/// Loads the manifest entries and runs [`run_packages`] on those that load.
pub fn run_pipeline(entries: &[ManifestEntry], config: &PipelineConfig, client: &LlmClient) -> RunOutput {
    let mut packages = Vec::with_capacity(entries.len());
    let mut failures = Vec::new();
    for e in entries {
        match e.load() {
            Ok(p) => packages.push(p),
            Err(err) => failures.push(LoadFailure {
                path: e.path.display().to_string(),
                error: err.to_string(),
            }),
        }
    }
    let mut out = run_packages(&packages, config, client);
    out.counters.packages_total += failures.len();
    out.counters.packages_failed_to_load = failures.len();
    out.load_failures = failures;
    out
}

/// Prescreens and analyzes every file of every package on a bounded pool of
/// workers. Output order does not depend on scheduling.
pub fn run_packages(packages: &[PackageArtifact], config: &PipelineConfig, client: &LlmClient) -> RunOutput {
    struct Job<'a> {
        pkg: usize,
        file: &'a SourceFile,
        findings: Vec<PreScreenFinding>,
        selected: bool,
    }
    let mut jobs = Vec::new();
    for (pi, pkg) in packages.iter().enumerate() {
        for file in &pkg.files {
            let findings = scan_file(file, &config.rules);
            let selected = config.mode == Mode::Full || !findings.is_empty();
            jobs.push(Job {
                pkg: pi,
                file,
                findings,
                selected,
            });
        }
    }

    let ctx = AnalysisContext {
        client,
        profile: &config.profile,
        policy: config.policy,
        estimator: config.estimator.as_ref(),
    };
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.max(1).min(jobs.len().max(1));
    let mut results: Vec<(usize, FileAnalysis)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(job) = jobs.get(i) else { break };
                        let analysis = if job.selected {
                            analyze_file(&ctx, job.file, job.findings.clone())
                        } else {
                            FileAnalysis::new(job.file, job.findings.clone(), FileOutcome::NotSelected)
                        };
                        done.push((i, analysis));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    results.sort_by_key(|(i, _)| *i);

    let mut per_pkg: BTreeMap<usize, Vec<FileAnalysis>> = BTreeMap::new();
    let mut counters = RunCounters {
        packages_total: packages.len(),
        ..RunCounters::default()
    };
    for (i, analysis) in results {
        counters.files_total += 1;
        if !jobs[i].findings.is_empty() {
            counters.files_flagged += 1;
        }
        match &analysis.outcome {
            FileOutcome::Completed { degraded, .. } => {
                counters.files_analyzed += 1;
                if *degraded {
                    counters.files_degraded += 1;
                }
            }
            FileOutcome::Skipped { .. } => counters.files_skipped += 1,
            FileOutcome::NotSelected => counters.files_not_selected += 1,
            FileOutcome::Failed { .. } => counters.files_failed += 1,
        }
        per_pkg.entry(jobs[i].pkg).or_default().push(analysis);
    }

    let verdicts: Vec<PackageVerdict> = packages
        .iter()
        .enumerate()
        .map(|(pi, pkg)| rollup_with_threshold(pkg, per_pkg.remove(&pi).unwrap_or_default(), config.threshold))
        .collect();
    counters.packages_malicious = verdicts.iter().filter(|v| v.is_malicious).count();
    RunOutput {
        verdicts,
        load_failures: Vec::new(),
        counters,
    }
}
