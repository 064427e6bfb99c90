//! Scoring runs against labeled manifests, and the file and cost reduction
//! of a prescreened run relative to a full one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetManifest, Label};
use crate::llmclient::reduction_tenths;
use crate::money::Money;
use crate::workflow::{PackageVerdict, RunArtifacts};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("packages without a label: {}", .0.join(", "))]
    Unlabeled(Vec<String>),
    #[error("runs are over different manifests ({full} vs {prescreened})")]
    ManifestMismatch { full: String, prescreened: String },
    #[error("invalid confusion matrix `{0}`: expected tp,tn,fp,fn")]
    BadMatrix(String),
    #[error("{what}: {after} is not a reduction from {before}")]
    NotAReduction { what: String, before: String, after: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Package-level matrix of a run. Labels come from `manifest`, falling
    /// back to the label stored in the verdict.
    pub fn from_verdicts(verdicts: &[PackageVerdict], manifest: Option<&DatasetManifest>) -> Result<ConfusionMatrix, EvalError> {
        let mut cm = ConfusionMatrix::default();
        let mut unlabeled = Vec::new();
        for v in verdicts {
            let label = manifest.and_then(|m| m.label_of(&v.name, &v.version)).or(v.label);
            match (label, v.is_malicious) {
                (Some(Label::Malicious), true) => cm.tp += 1,
                (Some(Label::Malicious), false) => cm.fn_ += 1,
                (Some(Label::Neutral), true) => cm.fp += 1,
                (Some(Label::Neutral), false) => cm.tn += 1,
                (None, _) => unlabeled.push(v.id()),
            }
        }
        if unlabeled.is_empty() {
            Ok(cm)
        } else {
            Err(EvalError::Unlabeled(unlabeled))
        }
    }

    pub fn from_run(run: &RunArtifacts, manifest: Option<&DatasetManifest>) -> Result<ConfusionMatrix, EvalError> {
        ConfusionMatrix::from_verdicts(&run.verdicts, manifest)
    }
}

impl FromStr for ConfusionMatrix {
    type Err = EvalError;

    /// Parses `tp,tn,fp,fn`. No consistency check is applied.
    fn from_str(s: &str) -> Result<ConfusionMatrix, EvalError> {
        let cells: Vec<u64> = s
            .split(',')
            .map(|c| c.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| EvalError::BadMatrix(s.to_string()))?;
        match cells[..] {
            [tp, tn, fp, fn_] => Ok(ConfusionMatrix::new(tp, tn, fp, fn_)),
            _ => Err(EvalError::BadMatrix(s.to_string())),
        }
    }
}

/// An exact ratio, or the explicit undefined state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ratio {
    Defined { num: u64, den: u64 },
    Undefined,
}

impl Ratio {
    fn of(num: u64, den: u64) -> Ratio {
        if den == 0 {
            Ratio::Undefined
        } else {
            Ratio::Defined { num, den }
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined { num, den } => Some(num as f64 / den as f64),
            Ratio::Undefined => None,
        }
    }

    /// Two decimals, truncated toward zero; `n/a` when undefined.
    pub fn display(self) -> String {
        match self {
            Ratio::Defined { num, den } => {
                let hundredths = (num as u128 * 100) / den as u128;
                format!("{}.{:02}", hundredths / 100, hundredths % 100)
            }
            Ratio::Undefined => "n/a".to_string(),
        }
    }
}

/// Precision, recall and F1 of a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

/// F1 is `2PR / (P + R)`, which over counts is `2tp / (2tp + fp + fn)`. It is
/// undefined when P or R is, or when both are zero.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsRow {
    let precision = Ratio::of(cm.tp, cm.tp + cm.fp);
    let recall = Ratio::of(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Ratio::Defined { .. }, Ratio::Defined { .. }) if cm.tp > 0 => {
            Ratio::of(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_)
        }
        _ => Ratio::Undefined,
    };
    MetricsRow { precision, recall, f1 }
}

impl fmt::Display for MetricsRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={} R={} F1={}",
            self.precision.display(),
            self.recall.display(),
            self.f1.display()
        )
    }
}

#[derive(Serialize)]
struct MetricsJson {
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    display: MetricsDisplay,
}

#[derive(Serialize)]
struct MetricsDisplay {
    precision: String,
    recall: String,
    f1: String,
}

impl Serialize for MetricsRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MetricsJson {
            precision: self.precision.value(),
            recall: self.recall.value(),
            f1: self.f1.value(),
            display: MetricsDisplay {
                precision: self.precision.display(),
                recall: self.recall.display(),
                f1: self.f1.display(),
            },
        }
        .serialize(s)
    }
}

/// What [`compare_runs`] needs from a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTotals {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_digest: Option<String>,
    pub files_analyzed: u64,
    pub costs: BTreeMap<String, Money>,
}

impl RunTotals {
    pub fn from_run(run: &RunArtifacts) -> RunTotals {
        RunTotals {
            manifest_digest: run.meta.manifest_digest.clone(),
            files_analyzed: run.meta.counters.files_analyzed as u64,
            costs: run.ledger.models.iter().map(|(m, a)| (m.clone(), a.cost)).collect(),
        }
    }
}

/// A before/after pair and its reduction in tenths of a percent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reduction<T> {
    pub before: T,
    pub after: T,
    pub reduction_tenths: u64,
}

impl<T> Reduction<T> {
    /// `"77.9%"`.
    pub fn percent(&self) -> String {
        format!("{}.{}%", self.reduction_tenths / 10, self.reduction_tenths % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionReport {
    pub files: Reduction<u64>,
    pub costs: BTreeMap<String, Reduction<Money>>,
}

fn reduce<T: Copy + fmt::Display>(what: &str, before: T, after: T, units: (u64, u64)) -> Result<Reduction<T>, EvalError> {
    reduction_tenths(units.0, units.1)
        .map(|reduction_tenths| Reduction {
            before,
            after,
            reduction_tenths,
        })
        .ok_or_else(|| EvalError::NotAReduction {
            what: what.to_string(),
            before: before.to_string(),
            after: after.to_string(),
        })
}

/// Reductions from a full run to a prescreened run, for the file count and
/// for every model costed in both. Percentages carry one decimal, rounded up
/// from the exact quotient.
pub fn compare_runs(full: &RunTotals, prescreened: &RunTotals) -> Result<ReductionReport, EvalError> {
    if let (Some(a), Some(b)) = (&full.manifest_digest, &prescreened.manifest_digest) {
        if a != b {
            return Err(EvalError::ManifestMismatch {
                full: a.clone(),
                prescreened: b.clone(),
            });
        }
    }
    let files = reduce(
        "files analyzed",
        full.files_analyzed,
        prescreened.files_analyzed,
        (full.files_analyzed, prescreened.files_analyzed),
    )?;
    let mut costs = BTreeMap::new();
    for (model, before) in &full.costs {
        if let Some(after) = prescreened.costs.get(model) {
            let r = reduce(&format!("{model} cost"), *before, *after, (before.nanos(), after.nanos()))?;
            costs.insert(model.clone(), r);
        }
    }
    Ok(ReductionReport { files, costs })
}

/// A named metrics row for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub name: String,
    pub matrix: ConfusionMatrix,
    pub metrics: MetricsRow,
}

impl EvalRow {
    pub fn new(name: impl Into<String>, matrix: ConfusionMatrix) -> EvalRow {
        EvalRow {
            name: name.into(),
            metrics: metrics(&matrix),
            matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionReport>,
}

impl EvalReport {
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        if !self.rows.is_empty() {
            md.push_str("| Run | TP | TN | FP | FN | Precision | Recall | F1 |\n");
            md.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for r in &self.rows {
                let m = &r.metrics;
                md.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    r.name,
                    r.matrix.tp,
                    r.matrix.tn,
                    r.matrix.fp,
                    r.matrix.fn_,
                    m.precision.display(),
                    m.recall.display(),
                    m.f1.display()
                ));
            }
        }
        if let Some(red) = &self.reduction {
            if !md.is_empty() {
                md.push('\n');
            }
            md.push_str("| Quantity | Full | Prescreened | Reduction |\n");
            md.push_str("|---|---:|---:|---:|\n");
            md.push_str(&format!(
                "| Files analyzed | {} | {} | {} |\n",
                red.files.before,
                red.files.after,
                red.files.percent()
            ));
            for (model, c) in &red.costs {
                md.push_str(&format!(
                    "| Cost ({model}) | {} | {} | {} |\n",
                    c.before,
                    c.after,
                    c.percent()
                ));
            }
        }
        md
    }
}
