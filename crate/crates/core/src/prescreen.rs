//! Static pre-screening rules.
//!
//! Rules are line-oriented text patterns grouped into six categories. The
//! scanner is recall-oriented triage: it decides which files go to the
//! (expensive) model stages and feeds the mock analyst.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{FileKind, PackageArtifact, SourceFile};

const DEFAULT_RULES: &str = include_str!("../resources/rules/default.json");

/// Rule id of the built-in install-script hook check applied to manifests.
pub const INSTALL_HOOK_RULE_ID: &str = "MISC-001";

const MAX_EXCERPT_CHARS: usize = 120;
const INSTALL_HOOKS: [&str; 3] = ["preinstall", "install", "postinstall"];

static HOOK_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#""(preinstall|install|postinstall)"\s*:\s*"\s*[^"\s]"#).expect("valid regex")
});

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("cannot read rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed rule file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rule {id}: invalid regex: {message}")]
    BadPattern { id: String, message: String },
    #[error("rule {0}: empty pattern")]
    EmptyPattern(String),
    #[error("duplicate rule id {0}")]
    DuplicateId(String),
    #[error("rule set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    CodeInjection,
    SensitiveDataExposure,
    Network,
    FileSystemAccess,
    ObfuscationEncoding,
    Miscellaneous,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::CodeInjection,
        Category::SensitiveDataExposure,
        Category::Network,
        Category::FileSystemAccess,
        Category::ObfuscationEncoding,
        Category::Miscellaneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::CodeInjection => "code_injection",
            Category::SensitiveDataExposure => "sensitive_data_exposure",
            Category::Network => "network",
            Category::FileSystemAccess => "file_system_access",
            Category::ObfuscationEncoding => "obfuscation_encoding",
            Category::Miscellaneous => "miscellaneous",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
    Alert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Literal,
    Regex,
}

/// On-disk form of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub id: String,
    pub category: Category,
    pub pattern: String,
    pub pattern_kind: PatternKind,
    pub severity: Severity,
    pub description: String,
}

#[derive(Debug, Clone)]
enum Matcher {
    Literal(String),
    Regex(Regex),
}

impl Matcher {
    fn find(&self, line: &str) -> Option<usize> {
        match self {
            Matcher::Literal(s) => line.find(s.as_str()),
            Matcher::Regex(re) => re.find(line).map(|m| m.start()),
        }
    }
}

/// A compiled rule.
#[derive(Debug, Clone)]
pub struct Rule {
    spec: RuleSpec,
    matcher: Matcher,
}

impl Rule {
    pub fn compile(spec: RuleSpec) -> Result<Rule, RuleError> {
        if spec.pattern.is_empty() {
            return Err(RuleError::EmptyPattern(spec.id));
        }
        let matcher = match spec.pattern_kind {
            PatternKind::Literal => Matcher::Literal(spec.pattern.clone()),
            PatternKind::Regex => Matcher::Regex(Regex::new(&spec.pattern).map_err(|e| {
                RuleError::BadPattern {
                    id: spec.id.clone(),
                    message: e.to_string(),
                }
            })?),
        };
        Ok(Rule { spec, matcher })
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn category(&self) -> Category {
        self.spec.category
    }

    pub fn spec(&self) -> &RuleSpec {
        &self.spec
    }
}

/// A validated, compiled set of rules with unique ids.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    /// The rule set shipped with the crate.
    pub fn builtin() -> RuleSet {
        RuleSet::from_json(DEFAULT_RULES).expect("bundled rule set is valid")
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RuleSet::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RuleSet, RuleError> {
        let specs: Vec<RuleSpec> = serde_json::from_str(text)?;
        RuleSet::from_specs(specs)
    }

    pub fn from_specs(specs: Vec<RuleSpec>) -> Result<RuleSet, RuleError> {
        if specs.is_empty() {
            return Err(RuleError::Empty);
        }
        let mut ids = HashSet::new();
        let mut rules = Vec::with_capacity(specs.len());
        for spec in specs {
            if spec.id == INSTALL_HOOK_RULE_ID || !ids.insert(spec.id.clone()) {
                return Err(RuleError::DuplicateId(spec.id));
            }
            rules.push(Rule::compile(spec)?);
        }
        Ok(RuleSet { rules })
    }

    /// Returns a new set with `spec` appended.
    pub fn with_rule(&self, spec: RuleSpec) -> Result<RuleSet, RuleError> {
        let mut specs: Vec<RuleSpec> = self.specs().cloned().collect();
        specs.push(spec);
        RuleSet::from_specs(specs)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn specs(&self) -> impl Iterator<Item = &RuleSpec> {
        self.rules.iter().map(|r| &r.spec)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// One static-rule hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreScreenFinding {
    pub rule_id: String,
    pub category: Category,
    pub file_path: String,
    /// 1-based line number.
    pub line: usize,
    pub excerpt: String,
}

/// Scans one file. Findings are ordered by (line, rule id), one per rule and line.
pub fn scan_file(file: &SourceFile, rules: &RuleSet) -> Vec<PreScreenFinding> {
    let mut findings = Vec::new();
    for (idx, line) in file.content.lines().enumerate() {
        for rule in &rules.rules {
            if let Some(at) = rule.matcher.find(line) {
                findings.push(PreScreenFinding {
                    rule_id: rule.spec.id.clone(),
                    category: rule.spec.category,
                    file_path: file.path.clone(),
                    line: idx + 1,
                    excerpt: excerpt(line, at).to_string(),
                });
            }
        }
    }
    if file.kind == FileKind::Manifest {
        findings.extend(install_hook_findings(file));
    }
    findings.sort_by(|a, b| a.line.cmp(&b.line).then_with(|| a.rule_id.cmp(&b.rule_id)));
    findings.dedup_by(|a, b| a.line == b.line && a.rule_id == b.rule_id);
    findings
}

/// Scans every file and keeps only those with at least one finding.
pub fn scan_package(pkg: &PackageArtifact, rules: &RuleSet) -> BTreeMap<String, Vec<PreScreenFinding>> {
    pkg.files
        .iter()
        .filter_map(|f| {
            let found = scan_file(f, rules);
            (!found.is_empty()).then(|| (f.path.clone(), found))
        })
        .collect()
}

/// Distinct categories among `findings`.
pub fn categories(findings: &[PreScreenFinding]) -> BTreeSet<Category> {
    findings.iter().map(|f| f.category).collect()
}

fn install_hook_findings(file: &SourceFile) -> Vec<PreScreenFinding> {
    // When the manifest parses, only hooks that really sit under `scripts`
    // count; otherwise fall back to the textual match.
    let declared: Option<BTreeSet<String>> = serde_json::from_str::<serde_json::Value>(&file.content)
        .ok()
        .map(|v| {
            let scripts = v.get("scripts").and_then(|s| s.as_object());
            INSTALL_HOOKS
                .iter()
                .filter(|h| {
                    scripts
                        .and_then(|s| s.get(**h))
                        .and_then(|c| c.as_str())
                        .is_some_and(|c| !c.trim().is_empty())
                })
                .map(|h| h.to_string())
                .collect()
        });

    let mut out = Vec::new();
    for (idx, line) in file.content.lines().enumerate() {
        for caps in HOOK_LINE.captures_iter(line) {
            let hook = &caps[1];
            if declared.as_ref().is_some_and(|d| !d.contains(hook)) {
                continue;
            }
            let at = caps.get(0).map_or(0, |m| m.start());
            out.push(PreScreenFinding {
                rule_id: INSTALL_HOOK_RULE_ID.to_string(),
                category: Category::Miscellaneous,
                file_path: file.path.clone(),
                line: idx + 1,
                excerpt: excerpt(line, at).to_string(),
            });
        }
    }
    out
}

/// A slice of `line` of at most [`MAX_EXCERPT_CHARS`] chars that contains
/// the match start `at`.
fn excerpt(line: &str, at: usize) -> &str {
    let trimmed = line.trim();
    if trimmed.chars().count() <= MAX_EXCERPT_CHARS {
        return trimmed;
    }
    // Start a little before the match, on a char boundary.
    let mut start = at.saturating_sub(20).min(line.len());
    while !line.is_char_boundary(start) {
        start -= 1;
    }
    let tail = &line[start..];
    let end = tail
        .char_indices()
        .nth(MAX_EXCERPT_CHARS)
        .map_or(tail.len(), |(i, _)| i);
    &tail[..end]
}
