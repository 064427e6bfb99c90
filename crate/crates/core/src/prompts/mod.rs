//! System and user prompts for the three analysis stages, plus token
//! budgeting against a model's context window.

mod profile;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SourceFile;
use crate::tokens::{estimate_tokens, TokenEstimator};

pub use profile::{
    load_profile, ConfigError, ModelProfile, Profile, Stage, StageConfig, StageSet, BUILTIN_PROFILES,
};

pub const INITIAL_SYSTEM: &str = include_str!("../../resources/prompts/initial_system.txt");
pub const CRITIQUE_SYSTEM: &str = include_str!("../../resources/prompts/critique_system.txt");
pub const FINAL_SYSTEM: &str = include_str!("../../resources/prompts/final_system.txt");
pub const USER_INSTRUCTION: &str = include_str!("../../resources/prompts/user_instruction.txt");

/// Appended after file content cut to fit the context window.
pub const TRUNCATION_MARKER: &str = "[TRUNCATED BY SCANNER]";

/// Header line opening each forwarded report in critique and final prompts.
pub const REPORT_HEADER_PREFIX: &str = "=== REPORT ";
/// Header line opening the file content in critique and final prompts.
pub const FILE_HEADER_PREFIX: &str = "=== FILE: ";

const REPORT_COUNT_SLOT: &str = "{report_count}";
const INITIAL_SLOT: &str = "{initial_system}";

/// Why a file produced no prompt. Distinct from a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    EmptyFile,
    OverBudget { needed: usize, budget: usize },
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::EmptyFile => f.write_str("empty file"),
            SkipReason::OverBudget { needed, budget } => {
                write!(f, "needs {needed} user tokens, budget is {budget}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("skipped: {0}")]
    Skip(SkipReason),
    #[error("{0} stage needs at least one prior report")]
    NoReports(&'static str),
    #[error("system prompt ({system} tokens) plus completion reserve ({reserve}) exceeds the {context} token context")]
    SystemPromptTooLarge {
        system: usize,
        reserve: usize,
        context: usize,
    },
}

impl PromptError {
    pub fn is_skip(&self) -> bool {
        matches!(self, PromptError::Skip(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    #[default]
    TruncateTail,
    Skip,
}

/// User prompt pieces; only `content` is ever truncated.
#[derive(Debug, Clone, PartialEq, Eq)]
struct UserParts {
    preamble: String,
    content: String,
    truncated: bool,
    instruction: Option<&'static str>,
}

impl UserParts {
    fn assemble(&self) -> String {
        let mut out = String::with_capacity(self.preamble.len() + self.content.len() + 512);
        out.push_str(&self.preamble);
        out.push_str(&self.content);
        if self.truncated {
            if !out.ends_with('\n') {
                out.push('\n');
            }
            out.push_str(TRUNCATION_MARKER);
            out.push('\n');
        }
        if let Some(instr) = self.instruction {
            out.push_str("\n\n");
            out.push_str(instr);
        }
        out
    }
}

/// A rendered system/user prompt pair for one file and stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub stage: Stage,
    pub file_path: String,
    pub system_text: String,
    pub user_text: String,
    /// Estimated tokens of system plus user text.
    pub token_estimate: usize,
    parts: UserParts,
}

impl PromptBundle {
    fn new(stage: Stage, file_path: &str, system_text: String, parts: UserParts) -> PromptBundle {
        let user_text = parts.assemble();
        PromptBundle {
            stage,
            file_path: file_path.to_string(),
            token_estimate: estimate_tokens(&system_text) + estimate_tokens(&user_text),
            system_text,
            user_text,
            parts,
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.parts.truncated
    }
}

/// First-stage prompt: the analyst role with the report template, and the
/// file content followed by the analysis instruction.
pub fn render_initial(file: &SourceFile) -> Result<PromptBundle, PromptError> {
    if file.content.trim().is_empty() {
        return Err(PromptError::Skip(SkipReason::EmptyFile));
    }
    Ok(PromptBundle::new(
        Stage::Initial,
        &file.path,
        INITIAL_SYSTEM.to_string(),
        UserParts {
            preamble: String::new(),
            content: file.content.clone(),
            truncated: false,
            instruction: Some(USER_INSTRUCTION),
        },
    ))
}

/// Second-stage prompt: the reviewer role over all first-stage reports.
pub fn render_critique(file: &SourceFile, prior_reports: &[String]) -> Result<PromptBundle, PromptError> {
    if prior_reports.is_empty() {
        return Err(PromptError::NoReports("critique"));
    }
    Ok(PromptBundle::new(
        Stage::Critique,
        &file.path,
        critique_system(prior_reports.len()),
        reports_then_file(file, prior_reports),
    ))
}

/// Third-stage prompt: select-and-improve over the critique reports, with
/// the first-stage instructions embedded.
pub fn render_final(file: &SourceFile, critique_reports: &[String]) -> Result<PromptBundle, PromptError> {
    if critique_reports.is_empty() {
        return Err(PromptError::NoReports("final"));
    }
    Ok(PromptBundle::new(
        Stage::Final,
        &file.path,
        final_system(critique_reports.len()),
        reports_then_file(file, critique_reports),
    ))
}

pub fn critique_system(report_count: usize) -> String {
    CRITIQUE_SYSTEM.replace(REPORT_COUNT_SLOT, &report_count.to_string())
}

pub fn final_system(report_count: usize) -> String {
    FINAL_SYSTEM
        .replace(REPORT_COUNT_SLOT, &report_count.to_string())
        .replace(INITIAL_SLOT, INITIAL_SYSTEM.trim_end())
}

fn reports_then_file(file: &SourceFile, reports: &[String]) -> UserParts {
    let mut preamble = String::new();
    for (i, r) in reports.iter().enumerate() {
        preamble.push_str(&format!("{REPORT_HEADER_PREFIX}{} ===\n", i + 1));
        preamble.push_str(r.trim_end());
        preamble.push_str("\n\n");
    }
    preamble.push_str(&format!("{FILE_HEADER_PREFIX}{} ===\n", file.path));
    UserParts {
        preamble,
        content: file.content.clone(),
        truncated: false,
        instruction: None,
    }
}

/// Tokens available to the user prompt.
pub fn user_budget(
    system_tokens: usize,
    profile: &ModelProfile,
) -> Result<usize, PromptError> {
    let reserved = system_tokens + profile.completion_reserve_tokens;
    if reserved >= profile.context_tokens {
        return Err(PromptError::SystemPromptTooLarge {
            system: system_tokens,
            reserve: profile.completion_reserve_tokens,
            context: profile.context_tokens,
        });
    }
    Ok(profile.context_tokens - reserved)
}

/// Fits a bundle into the model context. The system prompt is charged
/// first, the completion reserve second, and the user prompt gets the rest.
/// Oversize user prompts are cut at the tail of the file content (with a
/// marker line) or skipped, per `policy`.
pub fn budget_fit(
    bundle: PromptBundle,
    profile: &ModelProfile,
    policy: TruncationPolicy,
    estimator: &dyn TokenEstimator,
) -> Result<PromptBundle, PromptError> {
    let system = estimator.estimate(&bundle.system_text);
    let budget = user_budget(system, profile)?;
    let needed = estimator.estimate(&bundle.user_text);
    if needed <= budget {
        return Ok(PromptBundle {
            token_estimate: system + needed,
            ..bundle
        });
    }
    let over = PromptError::Skip(SkipReason::OverBudget { needed, budget });
    if policy == TruncationPolicy::Skip {
        return Err(over);
    }

    let content: Vec<char> = bundle.parts.content.chars().collect();
    let fits = |keep: usize| -> Option<(UserParts, usize)> {
        let parts = UserParts {
            content: content[..keep].iter().collect(),
            truncated: true,
            ..bundle.parts.clone()
        };
        let tokens = estimator.estimate(&parts.assemble());
        (tokens <= budget).then_some((parts, tokens))
    };
    let Some(mut best) = fits(0) else {
        return Err(over);
    };
    // Largest content prefix that fits; estimators are monotone in length.
    let (mut lo, mut hi) = (0usize, content.len());
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        match fits(mid) {
            Some(found) => {
                best = found;
                lo = mid;
            }
            None => hi = mid - 1,
        }
    }
    let (parts, tokens) = best;
    Ok(PromptBundle {
        user_text: parts.assemble(),
        token_estimate: system + tokens,
        parts,
        ..bundle
    })
}

/// SHA-256 of each frozen prompt resource.
pub fn prompt_checksums() -> BTreeMap<&'static str, String> {
    [
        ("initial_system", INITIAL_SYSTEM),
        ("critique_system", CRITIQUE_SYSTEM),
        ("final_system", FINAL_SYSTEM),
        ("user_instruction", USER_INSTRUCTION),
    ]
    .into_iter()
    .map(|(name, text)| (name, hex::encode(Sha256::digest(text.as_bytes()))))
    .collect()
}

/// Splits a critique or final user prompt back into its forwarded reports
/// and the file content.
pub fn split_forwarded(user_text: &str) -> (Vec<&str>, &str) {
    let Some(file_at) = user_text.find(FILE_HEADER_PREFIX) else {
        return (Vec::new(), user_text);
    };
    let (head, tail) = user_text.split_at(file_at);
    let content = tail.split_once('\n').map_or("", |(_, rest)| rest);
    let reports = head
        .split(REPORT_HEADER_PREFIX)
        .filter_map(|chunk| chunk.split_once('\n').map(|(_, body)| body.trim()))
        .filter(|body| !body.is_empty())
        .collect();
    (reports, content)
}

/// Recovers the file content from a first-stage user prompt.
pub fn initial_content(user_text: &str) -> &str {
    let body = user_text
        .strip_suffix(USER_INSTRUCTION)
        .map(|b| b.strip_suffix("\n\n").unwrap_or(b))
        .unwrap_or(user_text);
    strip_marker(body)
}

/// Drops a trailing truncation marker line.
pub fn strip_marker(content: &str) -> &str {
    content
        .strip_suffix(&format!("{TRUNCATION_MARKER}\n"))
        .unwrap_or(content)
}
