//! Analysis reports: the eleven-field JSON document every model stage
//! returns, a tolerant parser for what models actually emit, score
//! consistency checks and the score bands reviewers read.

mod bands;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use bands::{band_of, Band, BandError, Scale};
pub use parse::{parse_report, ParseError, ParseErrorKind};

/// The text-field values of the response template. A model that echoes one
/// back verbatim has not actually analyzed the file.
pub const TEMPLATE_VALUES: [(&str, &str); 7] = [
    ("purpose", "Purpose of this source code"),
    ("sources", "Places where code reads input or data"),
    (
        "sinks",
        "Places where untrusted data can lead to potential data leak or effect",
    ),
    ("flows", "Source-to-sink paths"),
    ("anomalies", "Places where code does anything unusual"),
    ("analysis", "Step-by-step analysis of the entire code fragment."),
    ("conclusion", "Conclusions and short summary of your findings"),
];

/// Echo variants observed in the wild in addition to [`TEMPLATE_VALUES`].
pub(crate) const TEMPLATE_VARIANTS: [(&str, &str); 1] =
    [("conclusion", "Conclusions and a short summary of your findings")];

pub(crate) fn is_placeholder(field: &str, value: &str) -> bool {
    TEMPLATE_VALUES
        .iter()
        .chain(TEMPLATE_VARIANTS.iter())
        .any(|(k, v)| *k == field && *v == value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    StrippedPrefix,
    StrippedFence,
    UnwrappedArray,
    TrailingComma,
    InsertedComma,
    MissingKeyDefaulted,
    ExtraKeyDropped,
    TruncationRecovered,
    ScoreClamped,
    PlaceholderText,
}

/// One repair applied while parsing, in application order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairNote {
    pub kind: RepairKind,
    pub detail: String,
}

impl RepairNote {
    pub fn new(kind: RepairKind, detail: impl Into<String>) -> RepairNote {
        RepairNote {
            kind,
            detail: detail.into(),
        }
    }
}

/// A parsed analysis report. Scores are always within `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub purpose: String,
    pub sources: String,
    pub sinks: String,
    pub flows: String,
    pub anomalies: String,
    pub analysis: String,
    pub conclusion: String,
    pub confidence: f64,
    pub obfuscated: f64,
    pub malware: f64,
    #[serde(rename = "securityRisk")]
    pub security_risk: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<RepairNote>,
}

#[derive(Serialize)]
struct Canonical<'a> {
    purpose: &'a str,
    sources: &'a str,
    sinks: &'a str,
    flows: &'a str,
    anomalies: &'a str,
    analysis: &'a str,
    conclusion: &'a str,
    confidence: f64,
    obfuscated: f64,
    malware: f64,
    #[serde(rename = "securityRisk")]
    security_risk: f64,
}

impl AnalysisReport {
    /// Wire form: the eleven keys in template order as a strict JSON object.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&Canonical {
            purpose: &self.purpose,
            sources: &self.sources,
            sinks: &self.sinks,
            flows: &self.flows,
            anomalies: &self.anomalies,
            analysis: &self.analysis,
            conclusion: &self.conclusion,
            confidence: self.confidence,
            obfuscated: self.obfuscated,
            malware: self.malware,
            security_risk: self.security_risk,
        })
        .expect("report fields are serializable")
    }

    pub fn has_violation(&self, kind: RepairKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    /// Equality of all fields except `violations`.
    pub fn same_content(&self, other: &AnalysisReport) -> bool {
        let mut a = self.clone();
        a.violations.clear();
        let mut b = other.clone();
        b.violations.clear();
        a == b
    }

    pub(crate) fn text_field_mut(&mut self, key: &str) -> Option<&mut String> {
        Some(match key {
            "purpose" => &mut self.purpose,
            "sources" => &mut self.sources,
            "sinks" => &mut self.sinks,
            "flows" => &mut self.flows,
            "anomalies" => &mut self.anomalies,
            "analysis" => &mut self.analysis,
            "conclusion" => &mut self.conclusion,
            _ => return None,
        })
    }

    pub(crate) fn score_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "confidence" => &mut self.confidence,
            "obfuscated" => &mut self.obfuscated,
            "malware" => &mut self.malware,
            "securityRisk" => &mut self.security_risk,
            _ => return None,
        })
    }
}

/// A consistency problem between a report's scores and its prose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ConsistencyFlag {
    /// Malware above 0.5 with an empty or template conclusion.
    UnjustifiedMalwareScore,
    /// Malware at least 0.75 while confidence is below 0.25.
    HighMalwareLowConfidence,
    /// The model emitted an out-of-range score.
    ScoreClamped { detail: String },
}

impl fmt::Display for ConsistencyFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsistencyFlag::UnjustifiedMalwareScore => {
                f.write_str("malware score above 0.5 without a conclusion")
            }
            ConsistencyFlag::HighMalwareLowConfidence => {
                f.write_str("malware score of 0.75 or more at confidence below 0.25")
            }
            ConsistencyFlag::ScoreClamped { detail } => write!(f, "score clamped ({detail})"),
        }
    }
}

pub fn validate_scores(report: &AnalysisReport) -> Vec<ConsistencyFlag> {
    let mut flags = Vec::new();
    if report.malware > 0.5
        && (report.conclusion.trim().is_empty() || is_placeholder("conclusion", &report.conclusion))
    {
        flags.push(ConsistencyFlag::UnjustifiedMalwareScore);
    }
    if report.malware >= 0.75 && report.confidence < 0.25 {
        flags.push(ConsistencyFlag::HighMalwareLowConfidence);
    }
    flags.extend(
        report
            .violations
            .iter()
            .filter(|v| v.kind == RepairKind::ScoreClamped)
            .map(|v| ConsistencyFlag::ScoreClamped {
                detail: v.detail.clone(),
            }),
    );
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AnalysisReport {
        AnalysisReport {
            purpose: "Collects host data".into(),
            sources: "hostname".into(),
            sinks: "curl".into(),
            flows: "hostname -> curl".into(),
            anomalies: "base64".into(),
            analysis: "step by step".into(),
            conclusion: "Exfiltrates data".into(),
            confidence: 0.9,
            obfuscated: 0.2,
            malware: 1.0,
            security_risk: 1.0,
            violations: vec![],
        }
    }

    #[test]
    fn canonical_key_order() {
        let json = sample().to_canonical_json();
        let keys = [
            "purpose", "sources", "sinks", "flows", "anomalies", "analysis", "conclusion",
            "confidence", "obfuscated", "malware", "securityRisk",
        ];
        let mut last = 0;
        for k in keys {
            let at = json.find(&format!("\"{k}\"")).unwrap();
            assert!(at >= last);
            last = at;
        }
        assert!(!json.contains("violations"));
        assert!(json.starts_with('{'));
    }

    #[test]
    fn consistency_flags() {
        let mut r = sample();
        r.malware = 0.9;
        r.conclusion.clear();
        assert_eq!(validate_scores(&r), vec![ConsistencyFlag::UnjustifiedMalwareScore]);

        let mut r = sample();
        r.malware = 0.3;
        assert!(validate_scores(&r).is_empty());

        let mut r = sample();
        r.confidence = 0.1;
        assert_eq!(validate_scores(&r), vec![ConsistencyFlag::HighMalwareLowConfidence]);

        let r = parse_report(&sample().to_canonical_json().replace("\"malware\":1.0", "\"malware\":1.4")).unwrap();
        assert_eq!(r.malware, 1.0);
        assert!(matches!(validate_scores(&r).as_slice(), [ConsistencyFlag::ScoreClamped { .. }]));
    }

    #[test]
    fn placeholder_conclusion_is_unjustified() {
        let mut r = sample();
        r.conclusion = "Conclusions and short summary of your findings".into();
        assert_eq!(validate_scores(&r), vec![ConsistencyFlag::UnjustifiedMalwareScore]);
    }
}
