//! Record a run into a cassette, then replay it with no model at all.
//!
//! $ cargo run --example record_replay

use std::sync::{Arc, Mutex};

use pkgsentry::corpus::load_package;
use pkgsentry::llmclient::{Cassette, ChatBackend, CostLedger, LlmClient, MockAnalyst, RecordingBackend, ReplayBackend};
use pkgsentry::prescreen::RuleSet;
use pkgsentry::prompts::Profile;
use pkgsentry::workflow::{run_packages, Mode, PipelineConfig, RunOutput};

fn run(backend: Arc<dyn ChatBackend>) -> (RunOutput, pkgsentry::llmclient::CostSummary) {
    let pkg = load_package(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden/corporate-delegate-packages")).unwrap();
    let profile = Profile::builtin("gpt-4").unwrap();
    let ledger = Arc::new(CostLedger::for_profile(&profile.model));
    let client = LlmClient::new(backend, ledger.clone());
    let out = run_packages(&[pkg], &PipelineConfig::new(profile, Mode::Full), &client);
    (out, ledger.report())
}

fn main() {
    let tape = Arc::new(Mutex::new(Cassette::new("gpt-4-1106-preview")));
    let mock = Arc::new(MockAnalyst::new(RuleSet::builtin()));
    let (recorded, rec_cost) = run(Arc::new(RecordingBackend::new(mock, tape.clone())));

    let path = std::env::temp_dir().join("pkgsentry-example.cassette.json");
    tape.lock().unwrap().save(&path).unwrap();
    let cassette = Cassette::load(&path).unwrap();
    println!("recorded {} responses to {}", cassette.len(), path.display());

    let (replayed, rep_cost) = run(Arc::new(ReplayBackend::new(cassette)));
    println!("verdicts identical: {}", recorded.verdicts == replayed.verdicts);
    println!("cost recorded {} / replayed {}", rec_cost.total_cost, rep_cost.total_cost);
}
