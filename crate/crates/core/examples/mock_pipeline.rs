//! Run the bundled 40-package corpus through the offline analyst and print
//! the review queue.
//!
//! $ cargo run --example mock_pipeline -- prescreened

use std::sync::Arc;

use pkgsentry::corpus::DatasetManifest;
use pkgsentry::llmclient::{CostLedger, LlmClient, MockAnalyst};
use pkgsentry::prescreen::RuleSet;
use pkgsentry::prompts::Profile;
use pkgsentry::workflow::{run_pipeline, triage_order, Mode, PipelineConfig};

fn main() {
    let mode: Mode = std::env::args().nth(1).as_deref().unwrap_or("full").parse().unwrap();
    let manifest_path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus/manifest.jsonl");
    let manifest = DatasetManifest::load(&manifest_path).unwrap();

    let profile = Profile::builtin("gpt-4").unwrap();
    let ledger = Arc::new(CostLedger::for_profile(&profile.model));
    let client = LlmClient::new(Arc::new(MockAnalyst::new(RuleSet::builtin())), ledger.clone());
    let out = run_pipeline(&manifest.entries, &PipelineConfig::new(profile, mode), &client);

    let mut verdicts = out.verdicts.clone();
    triage_order(&mut verdicts);
    println!("{:<32} {:>7} {:>7}  malicious", "package", "malware", "risk");
    for v in verdicts.iter().take(12) {
        println!("{:<32} {:>7.2} {:>7.2}  {}", v.id(), v.max_malware_score, v.max_security_risk, v.is_malicious);
    }
    let c = out.counters;
    println!(
        "\n{mode:?}: {} files, {} analyzed, {} not selected, {} skipped",
        c.files_total, c.files_analyzed, c.files_not_selected, c.files_skipped
    );
    let costs = ledger.report();
    println!("{} calls, {}", costs.calls, costs.total_cost);
}
