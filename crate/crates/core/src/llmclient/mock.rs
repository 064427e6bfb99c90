use std::collections::{BTreeMap, BTreeSet};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};
use crate::corpus::SourceFile;
use crate::prescreen::{scan_file, Category, PreScreenFinding, RuleSet, INSTALL_HOOK_RULE_ID};
use crate::prompts::{initial_content, split_forwarded, strip_marker, CRITIQUE_SYSTEM, FINAL_SYSTEM, INITIAL_SYSTEM};
use crate::reportjson::{parse_report, AnalysisReport};
use crate::tokens::estimate_tokens;

/// Deterministic offline analyst.
///
/// First-stage reports are derived from the static rules: each distinct
/// category adds 0.35 to the malware score and a network finding adds 0.3.
/// The critique stage returns the forwarded reports with their scores
/// unchanged and the final stage returns the most confident one.
#[derive(Debug, Clone)]
pub struct MockAnalyst {
    rules: RuleSet,
    descriptions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MockStage {
    Initial,
    Critique,
    Final,
}

fn template_head(template: &str) -> &str {
    template.split('{').next().unwrap_or(template)
}

fn stage_of(system: &str) -> Option<MockStage> {
    if system == INITIAL_SYSTEM {
        Some(MockStage::Initial)
    } else if system.starts_with(template_head(CRITIQUE_SYSTEM)) {
        Some(MockStage::Critique)
    } else if system.starts_with(template_head(FINAL_SYSTEM)) {
        Some(MockStage::Final)
    } else {
        None
    }
}

fn bullet_list(items: &[String], empty: &str) -> String {
    if items.is_empty() {
        empty.to_string()
    } else {
        items.join("; ")
    }
}

impl MockAnalyst {
    pub fn new(rules: RuleSet) -> MockAnalyst {
        let mut descriptions: BTreeMap<String, String> = rules
            .specs()
            .map(|s| (s.id.clone(), s.description.clone()))
            .collect();
        descriptions.insert(INSTALL_HOOK_RULE_ID.into(), "Install-time script hook".into());
        MockAnalyst { rules, descriptions }
    }

    /// The report the mock writes for `content` seen under `path`.
    pub fn analyze(&self, path: &str, content: &str) -> AnalysisReport {
        let file = SourceFile::from_text(path, content);
        let findings = scan_file(&file, &self.rules);
        self.report_for(&findings)
    }

    fn report_for(&self, findings: &[PreScreenFinding]) -> AnalysisReport {
        let cats: BTreeSet<Category> = findings.iter().map(|f| f.category).collect();
        let network = cats.contains(&Category::Network);
        let exfil = network && cats.contains(&Category::SensitiveDataExposure);
        let k = cats.len() as u32;
        let malware_pct = (35 * k + if network { 30 } else { 0 }).min(100);
        let risk_pct = malware_pct.max((25 * k).min(100));
        let cat_list = cats.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ");

        let excerpts_of = |wanted: &[Category]| -> Vec<String> {
            findings
                .iter()
                .filter(|f| wanted.contains(&f.category))
                .map(|f| format!("line {}: {}", f.line, f.excerpt))
                .collect()
        };
        let sources = excerpts_of(&[Category::SensitiveDataExposure]);
        let sinks = excerpts_of(&[Category::Network, Category::FileSystemAccess, Category::CodeInjection]);
        let anomalies = excerpts_of(&[Category::ObfuscationEncoding, Category::Miscellaneous]);
        let steps: Vec<String> = findings
            .iter()
            .map(|f| {
                let desc = self.descriptions.get(&f.rule_id).map_or("", String::as_str);
                format!("line {} ({}): {desc}", f.line, f.rule_id)
            })
            .collect();

        let malicious = malware_pct > 50;
        let (purpose, conclusion) = if findings.is_empty() {
            (
                "Ordinary package code.".to_string(),
                "No malicious behavior found.".to_string(),
            )
        } else if exfil {
            (
                "Collects local system information and sends it to a remote host.".to_string(),
                format!("The code performs data exfiltration to a remote endpoint. Categories: {cat_list}."),
            )
        } else if malicious {
            (
                format!("Code exhibiting {cat_list} behavior."),
                format!("The code shows malicious behavior. Categories: {cat_list}."),
            )
        } else {
            (
                format!("Code exhibiting {cat_list} behavior."),
                format!("Suspicious constructs ({cat_list}) without clear malicious intent."),
            )
        };

        AnalysisReport {
            purpose,
            sources: bullet_list(&sources, "None of concern."),
            sinks: bullet_list(&sinks, "None of concern."),
            flows: if exfil {
                "Sensitive local data flows into a network request.".into()
            } else {
                "No source-to-sink flow of concern.".into()
            },
            anomalies: bullet_list(&anomalies, "None."),
            analysis: bullet_list(&steps, "Reviewed the whole file; no rule matched."),
            conclusion,
            confidence: if findings.is_empty() { 0.6 } else { 0.9 },
            obfuscated: if cats.contains(&Category::ObfuscationEncoding) { 0.8 } else { 0.05 },
            malware: f64::from(malware_pct) / 100.0,
            security_risk: f64::from(risk_pct) / 100.0,
            violations: Vec::new(),
        }
    }

    /// Content that parses as a JSON object is treated as a manifest.
    fn initial_path(content: &str) -> &'static str {
        match serde_json::from_str::<serde_json::Value>(content) {
            Ok(v) if v.is_object() => "package.json",
            _ => "input.js",
        }
    }

    fn texts(&self, req: &ChatRequest) -> Result<Vec<String>, LlmError> {
        let stage = stage_of(&req.system_text)
            .ok_or_else(|| LlmError::Config("mock backend does not recognize this system prompt".into()))?;
        let n = req.n.max(1) as usize;
        if stage == MockStage::Initial {
            let content = initial_content(&req.user_text);
            let report = self.analyze(Self::initial_path(content), content);
            return Ok(vec![report.to_canonical_json(); n]);
        }

        let (forwarded, content) = split_forwarded(&req.user_text);
        let path = req
            .user_text
            .split_once(crate::prompts::FILE_HEADER_PREFIX)
            .and_then(|(_, rest)| rest.split_once(" ===\n"))
            .map_or("input.js", |(p, _)| p);
        let parsed: Vec<AnalysisReport> = forwarded.iter().filter_map(|r| parse_report(r).ok()).collect();
        let fallback = || self.analyze(path, strip_marker(content));

        Ok(match stage {
            MockStage::Critique => (0..n)
                .map(|i| {
                    let mut r = parsed.get(i % parsed.len().max(1)).cloned().unwrap_or_else(fallback);
                    r.violations.clear();
                    r.analysis = format!("Reviewed against the code; scores are consistent. {}", r.analysis);
                    r.to_canonical_json()
                })
                .collect(),
            _ => {
                let best = parsed
                    .iter()
                    .fold(None::<&AnalysisReport>, |best, r| match best {
                        Some(b) if b.confidence >= r.confidence => Some(b),
                        _ => Some(r),
                    })
                    .cloned()
                    .unwrap_or_else(fallback);
                vec![best.to_canonical_json(); n]
            }
        })
    }
}

impl ChatBackend for MockAnalyst {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let texts = self.texts(req)?;
        Ok(ChatResponse {
            prompt_tokens: (estimate_tokens(&req.system_text) + estimate_tokens(&req.user_text)) as u64,
            completion_tokens: texts.iter().map(|t| estimate_tokens(t) as u64).sum(),
            texts,
            model_id: req.model_id.clone(),
        })
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}
