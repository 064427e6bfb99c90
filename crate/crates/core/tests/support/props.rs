//! Property suites. Each returns the number of generated cases it passed.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::time::Duration;

use pkgsentry::corpus::{PackageArtifact, SourceFile};
use pkgsentry::evalharness::{metrics, ConfusionMatrix, Ratio};
use pkgsentry::llmclient::{Clock, RateLimiter, VirtualClock};
use pkgsentry::prescreen::{scan_file, Category, PatternKind, RuleSet, RuleSpec, Severity};
use pkgsentry::prompts::{
    budget_fit, initial_content, render_initial, PromptError, Profile, TruncationPolicy, USER_INSTRUCTION,
};
use pkgsentry::reportjson::AnalysisReport;
use pkgsentry::tokens::{CharsPerToken, TokenEstimator};
use pkgsentry::workflow::{rollup_with_threshold, FileAnalysis, FileOutcome};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub const CASES: u32 = 1000;

pub type Suite = fn() -> Result<u32, String>;

pub const SUITES: [(&str, Suite); 5] = [
    ("rollup threshold monotonicity", threshold_monotonicity),
    ("prescreen rule-addition monotonicity", rule_addition_monotonicity),
    ("metrics scale invariance and F1 betweenness", metrics_scaling),
    ("budget_fit postcondition", budget_fit_postcondition),
    ("rate limiter window bound", rate_limiter_window),
];

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let passed = Cell::new(0u32);
    runner
        .run(&strategy, |v| {
            test(v)?;
            passed.set(passed.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(passed.get())
}

fn completed(path: &str, malware: f64) -> FileAnalysis {
    FileAnalysis {
        file_path: path.to_string(),
        outcome: FileOutcome::Completed {
            final_report: AnalysisReport {
                malware,
                security_risk: malware / 2.0,
                ..AnalysisReport::default()
            },
            degraded: false,
        },
        attempts: 1,
        findings: Vec::new(),
        stage1: Vec::new(),
        stage2: Vec::new(),
        stage3: None,
        truncated: None,
        file_excerpt: String::new(),
    }
}

/// A verdict malicious at some threshold stays malicious at every lower one.
pub fn threshold_monotonicity() -> Result<u32, String> {
    let pkg = PackageArtifact::from_files("pkg", "1.0.0", Vec::new()).unwrap();
    let strategy = (
        prop::collection::vec(prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0f64..=1.0], 0..8),
        0.0f64..=1.0,
        0.0f64..=1.0,
    );
    run(strategy, |(scores, a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let files: Vec<FileAnalysis> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| completed(&format!("f{i}.js"), *s))
            .collect();
        let at_lo = rollup_with_threshold(&pkg, files.clone(), lo);
        let at_hi = rollup_with_threshold(&pkg, files, hi);
        let max = scores.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(at_lo.max_malware_score, max);
        prop_assert_eq!(at_hi.is_malicious, max > hi);
        prop_assert!(!at_hi.is_malicious || at_lo.is_malicious);
        Ok(())
    })
}

const LINES: [&str; 12] = [
    "const x = require('fs');",
    "eval(payload);",
    "fetch('https://example.com/a');",
    "const token = process.env.NPM_TOKEN;",
    "Buffer.from(data, 'base64').toString();",
    "fs.writeFileSync('/tmp/a', b);",
    "require('child_process').exec(cmd);",
    "module.exports = function add(a, b) { return a + b; };",
    "// plain comment",
    "os.homedir() + '/.ssh/id_rsa'",
    "",
    "let counter = 0;",
];

const LITERALS: [&str; 8] = ["require", "eval", "process", "=", "('", "counter", "zzz", "a"];

/// Adding a rule never removes a finding, and the new rule fires exactly on
/// the lines containing its literal.
pub fn rule_addition_monotonicity() -> Result<u32, String> {
    let base = RuleSet::builtin();
    let strategy = (
        prop::collection::vec(prop_oneof![prop::sample::select(&LINES[..]).prop_map(String::from), "[ -~]{0,30}"], 0..20),
        prop::sample::select(&LITERALS[..]),
        prop::sample::select(&Category::ALL[..]),
    );
    run(strategy, |(lines, literal, category)| {
        let file = SourceFile::from_text("lib/index.js", &lines.join("\n"));
        let extended = base
            .with_rule(RuleSpec {
                id: "PROP-001".into(),
                category,
                pattern: literal.to_string(),
                pattern_kind: PatternKind::Literal,
                severity: Severity::Info,
                description: "generated".into(),
            })
            .unwrap();
        let key = |f: &pkgsentry::prescreen::PreScreenFinding| (f.rule_id.clone(), f.line);
        let before: BTreeSet<_> = scan_file(&file, &base).iter().map(key).collect();
        let after: BTreeSet<_> = scan_file(&file, &extended).iter().map(key).collect();
        prop_assert!(before.is_subset(&after));
        let added: BTreeSet<usize> = after.difference(&before).map(|(_, line)| *line).collect();
        let expected: BTreeSet<usize> = file
            .content
            .lines()
            .enumerate()
            .filter(|(_, l)| l.contains(literal))
            .map(|(i, _)| i + 1)
            .collect();
        prop_assert_eq!(added, expected);
        Ok(())
    })
}

fn same_value(a: Ratio, b: Ratio) -> bool {
    match (a, b) {
        (Ratio::Defined { num: n1, den: d1 }, Ratio::Defined { num: n2, den: d2 }) => {
            n1 as u128 * d2 as u128 == n2 as u128 * d1 as u128
        }
        (Ratio::Undefined, Ratio::Undefined) => true,
        _ => false,
    }
}

/// `a/b <= c/d` over exact integers.
fn le(a: Ratio, b: Ratio) -> bool {
    match (a, b) {
        (Ratio::Defined { num: n1, den: d1 }, Ratio::Defined { num: n2, den: d2 }) => {
            n1 as u128 * d2 as u128 <= n2 as u128 * d1 as u128
        }
        _ => false,
    }
}

/// Scaling every cell leaves P, R and F1 unchanged; F1 lies between P and R.
pub fn metrics_scaling() -> Result<u32, String> {
    let cell = prop_oneof![Just(0u64), 0u64..1_000_000];
    let strategy = ((cell.clone(), cell.clone(), cell.clone(), cell), 1u64..10_000);
    run(strategy, |((tp, tn, fp, fn_), k)| {
        let m = metrics(&ConfusionMatrix::new(tp, tn, fp, fn_));
        let s = metrics(&ConfusionMatrix::new(tp * k, tn * k, fp * k, fn_ * k));
        prop_assert!(same_value(m.precision, s.precision));
        prop_assert!(same_value(m.recall, s.recall));
        prop_assert!(same_value(m.f1, s.f1));
        prop_assert_eq!(m.to_string(), s.to_string());
        if let Ratio::Defined { .. } = m.f1 {
            let (lo, hi) = if le(m.precision, m.recall) {
                (m.precision, m.recall)
            } else {
                (m.recall, m.precision)
            };
            prop_assert!(le(lo, m.f1) && le(m.f1, hi), "{}", m);
        } else {
            prop_assert!(tp == 0);
        }
        Ok(())
    })
}

/// A fitted prompt is within budget, keeps the instruction, and carries a
/// prefix of the file content; an unfit one reports a consistent error.
pub fn budget_fit_postcondition() -> Result<u32, String> {
    let strategy = (
        "[a-z \n{}();é漢]{1,6000}",
        200usize..4000,
        50usize..600,
        1usize..6,
        prop::bool::ANY,
    );
    run(strategy, |(content, context, reserve, per, skip)| {
        let mut model = Profile::builtin("gpt-4").unwrap().model;
        model.context_tokens = context;
        model.completion_reserve_tokens = reserve;
        let est = CharsPerToken(per);
        let policy = if skip { TruncationPolicy::Skip } else { TruncationPolicy::TruncateTail };
        let file = SourceFile::from_text("index.js", &content);
        let bundle = render_initial(&file).map_err(|e| match e {
            PromptError::Skip(_) => TestCaseError::reject("blank content"),
            other => TestCaseError::fail(other.to_string()),
        })?;
        let system = est.estimate(&bundle.system_text);
        let original_user = bundle.user_text.clone();
        match budget_fit(bundle, &model, policy, &est) {
            Ok(fit) => {
                let user = est.estimate(&fit.user_text);
                prop_assert_eq!(fit.token_estimate, system + user);
                prop_assert!(fit.token_estimate + reserve <= context);
                prop_assert!(fit.user_text.ends_with(USER_INSTRUCTION));
                if fit.is_truncated() {
                    prop_assert!(!skip);
                    let kept = initial_content(&fit.user_text);
                    let kept = kept.strip_suffix('\n').unwrap_or(kept);
                    prop_assert!(content.starts_with(kept));
                } else {
                    prop_assert_eq!(fit.user_text, original_user);
                }
            }
            Err(PromptError::SystemPromptTooLarge { .. }) => prop_assert!(system + reserve >= context),
            Err(PromptError::Skip(pkgsentry::prompts::SkipReason::OverBudget { needed, budget })) => {
                prop_assert!(needed > budget);
                prop_assert_eq!(budget, context - reserve - system);
            }
            Err(other) => prop_assert!(false, "unexpected {}", other),
        }
        Ok(())
    })
}

/// Sequential grants follow `max(request, grant[i - limit] + window)`, so
/// no window ever holds more than `limit` grants.
pub fn rate_limiter_window() -> Result<u32, String> {
    let strategy = (1u32..8, 1u64..120_000, prop::collection::vec(0u64..30_000, 1..40));
    run(strategy, |(limit, window_ms, gaps)| {
        let window = Duration::from_millis(window_ms);
        let clock = VirtualClock::new();
        let limiter = RateLimiter::new(limit, window);
        let mut grants: Vec<Duration> = Vec::new();
        for gap in gaps {
            clock.advance(Duration::from_millis(gap));
            let requested = clock.now();
            let granted = limiter.acquire(&clock);
            let i = grants.len();
            let expected = if i >= limit as usize {
                requested.max(grants[i - limit as usize] + window)
            } else {
                requested
            };
            prop_assert_eq!(granted, expected);
            prop_assert_eq!(clock.now(), granted);
            grants.push(granted);
        }
        for w in grants.windows(limit as usize + 1) {
            prop_assert!(w[limit as usize] - w[0] >= window);
        }
        Ok(())
    })
}
