//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

pub mod malformed;
pub mod props;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use pkgsentry::corpus::DatasetManifest;
use pkgsentry::llmclient::{ChatBackend, CostLedger, LlmClient, MockAnalyst};
use pkgsentry::prescreen::{Category, RuleSet};
use pkgsentry::prompts::Profile;
use pkgsentry::workflow::{run_pipeline, Mode, PipelineConfig, RunOutput};
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus_manifest() -> DatasetManifest {
    DatasetManifest::load(&fixtures().join("corpus/manifest.jsonl")).unwrap()
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden/corporate-delegate-packages")
}

pub fn mock_backend() -> Arc<dyn ChatBackend> {
    Arc::new(MockAnalyst::new(RuleSet::builtin()))
}

pub fn client_for(backend: Arc<dyn ChatBackend>, profile: &Profile) -> LlmClient {
    LlmClient::new(backend, Arc::new(CostLedger::for_profile(&profile.model)))
}

/// Runs the shipped corpus through `backend`.
pub fn scan_corpus(backend: Arc<dyn ChatBackend>, mode: Mode) -> (RunOutput, LlmClient) {
    let profile = Profile::builtin("gpt-4").unwrap();
    let client = client_for(backend, &profile);
    let cfg = PipelineConfig::new(profile, mode);
    let out = run_pipeline(&corpus_manifest().entries, &cfg, &client);
    (out, client)
}

pub fn verdict_lines(out: &RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    for v in &out.verdicts {
        serde_json::to_writer(&mut buf, v).unwrap();
        buf.push(b'\n');
    }
    buf
}

/// Per-package outcomes computed by the fixture generator, independently of
/// this crate.
#[derive(Deserialize)]
pub struct Expectations {
    pub packages: Vec<Expected>,
}

#[derive(Deserialize)]
pub struct Expected {
    pub name: String,
    pub version: String,
    pub files: usize,
    pub files_flagged: usize,
    pub is_malicious: bool,
    pub max_malware: f64,
    pub file_categories: BTreeMap<String, ExpectedFile>,
}

#[derive(Deserialize)]
pub struct ExpectedFile {
    pub categories: BTreeSet<Category>,
    pub empty: bool,
    pub malware_pct: u32,
}

pub fn expectations() -> Expectations {
    let text = std::fs::read_to_string(fixtures().join("corpus/expectations.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

impl Expectations {
    /// Non-empty files whose expected malware score is at least `pct` percent.
    pub fn files_at_least(&self, pct: u32) -> usize {
        self.packages
            .iter()
            .flat_map(|p| p.file_categories.values())
            .filter(|f| !f.empty && f.malware_pct >= pct)
            .count()
    }
}
