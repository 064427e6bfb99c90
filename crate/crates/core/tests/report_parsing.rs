mod support;

use pkgsentry::reportjson::{parse_report, RepairKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::malformed::{check_case, corpus};

#[test]
fn malformed_corpus_matches_expectations() {
    let corpus = corpus();
    assert!(corpus.cases.len() >= 30);
    let mut failures = Vec::new();
    for case in &corpus.cases {
        if let Err(msg) = check_case(case) {
            failures.push(format!("{}: {msg}", case.name));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_covers_each_repair_kind() {
    let corpus = corpus();
    for kind in [
        RepairKind::StrippedPrefix,
        RepairKind::StrippedFence,
        RepairKind::UnwrappedArray,
        RepairKind::TrailingComma,
        RepairKind::InsertedComma,
        RepairKind::MissingKeyDefaulted,
        RepairKind::ExtraKeyDropped,
        RepairKind::TruncationRecovered,
        RepairKind::ScoreClamped,
        RepairKind::PlaceholderText,
    ] {
        assert!(
            corpus.cases.iter().any(|c| c.repairs.contains(&kind)),
            "no case exercises {kind:?}"
        );
    }
}

#[test]
fn random_bytes_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..512);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(r) = parse_report(&text) {
            for s in [r.confidence, r.obfuscated, r.malware, r.security_risk] {
                assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}

const ALPHABET: &[&str] = &[
    "{", "}", "[", "]", ",", ":", "\"", "'", "\\", "\n", " ", "```", "json", "malware", "securityRisk",
    "purpose", "conclusion", "0.5", "-3", "1e9", "NaN", "true", "null", "\\u00e9", "\\ud83d",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn structured_noise_never_panics(tokens in prop::collection::vec(0..ALPHABET.len(), 0..80)) {
        let text: String = tokens.iter().map(|&i| ALPHABET[i]).collect();
        if let Ok(r) = parse_report(&text) {
            for s in [r.confidence, r.obfuscated, r.malware, r.security_risk] {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }

    #[test]
    fn canonical_output_round_trips(
        text in "[a-zA-Z0-9 .,'\"()\\-]{0,40}",
        scores in prop::array::uniform4(0.0f64..=1.0),
    ) {
        let report = pkgsentry::reportjson::AnalysisReport {
            purpose: text.clone(),
            sources: text.clone(),
            sinks: "none".into(),
            flows: "none".into(),
            anomalies: "none".into(),
            analysis: text.clone(),
            conclusion: "done".into(),
            confidence: scores[0],
            obfuscated: scores[1],
            malware: scores[2],
            security_risk: scores[3],
            violations: Vec::new(),
        };
        let back = parse_report(&report.to_canonical_json()).unwrap();
        prop_assert!(back.same_content(&report), "{:?}", back);
        prop_assert!(back.violations.is_empty());
    }
}
