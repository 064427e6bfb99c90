//! The malformed model-output corpus and its checker.

use std::collections::BTreeMap;

use pkgsentry::reportjson::{parse_report, ParseErrorKind, RepairKind};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct Corpus {
    pub cases: Vec<Case>,
}

#[derive(Deserialize)]
pub struct Case {
    pub name: String,
    pub raw: String,
    pub expect: String,
    #[serde(default)]
    pub repairs: Vec<RepairKind>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub keys: Option<usize>,
}

pub fn corpus() -> Corpus {
    let text = include_str!("../../fixtures/malformed_outputs.json");
    serde_json::from_str(text).unwrap()
}

pub fn check_case(case: &Case) -> Result<(), String> {
    match (case.expect.as_str(), parse_report(&case.raw)) {
        ("ok", Ok(report)) => {
            let kinds: Vec<RepairKind> = report.violations.iter().map(|v| v.kind).collect();
            if kinds != case.repairs {
                return Err(format!("repairs {kinds:?}, expected {:?}", case.repairs));
            }
            let json: serde_json::Value = serde_json::from_str(&report.to_canonical_json()).unwrap();
            for (key, want) in &case.scores {
                let got = json[key].as_f64().unwrap();
                if got != *want {
                    return Err(format!("{key} = {got}, expected {want}"));
                }
            }
            for (key, want) in &case.fields {
                let got = json[key].as_str().unwrap();
                if got != want {
                    return Err(format!("{key} = {got:?}, expected {want:?}"));
                }
            }
            Ok(())
        }
        ("error", Err(e)) => {
            let kind = match e.kind {
                ParseErrorKind::Empty => "empty",
                ParseErrorKind::NoRecognizableKey => "no_recognizable_key",
                ParseErrorKind::Truncated { keys } => {
                    if case.keys.is_some_and(|k| k != keys) {
                        return Err(format!("truncated with {keys} keys, expected {:?}", case.keys));
                    }
                    "truncated"
                }
            };
            if Some(kind) != case.error.as_deref() {
                return Err(format!("error {kind}, expected {:?}", case.error));
            }
            if e.raw != case.raw {
                return Err("error does not carry the raw text".into());
            }
            Ok(())
        }
        (want, Ok(r)) => Err(format!("expected {want}, parsed with {:?}", r.violations)),
        (want, Err(e)) => Err(format!("expected {want}, got {e}")),
    }
}
