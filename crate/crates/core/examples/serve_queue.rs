//! Write a run directory and read its review queue the way the HTTP API does.
//! Pass `--listen` to serve it on 127.0.0.1:8787 until Ctrl-C.
//!
//! $ cargo run --example serve_queue
//! $ cargo run --example serve_queue -- --listen
//! $ curl 'http://127.0.0.1:8787/api/queue?min_malware=0.5'

use std::sync::Arc;

use pkgsentry::cli::serve::{serve, ReviewStore, ReviewerVerdict, DEFAULT_MIN_MALWARE};
use pkgsentry::corpus::DatasetManifest;
use pkgsentry::llmclient::{CostLedger, LlmClient, MockAnalyst};
use pkgsentry::prescreen::RuleSet;
use pkgsentry::prompts::Profile;
use pkgsentry::workflow::{run_pipeline, write_run, Mode, PipelineConfig, RunMeta};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let manifest = DatasetManifest::load(&root.join("fixtures/corpus/manifest.jsonl")).unwrap();
    let profile = Profile::builtin("gpt-4").unwrap();
    let ledger = Arc::new(CostLedger::for_profile(&profile.model));
    let client = LlmClient::new(Arc::new(MockAnalyst::new(RuleSet::builtin())), ledger.clone());
    let cfg = PipelineConfig::new(profile, Mode::Prescreened);
    let out = run_pipeline(&manifest.entries, &cfg, &client);

    let dir = std::env::temp_dir().join("pkgsentry-example-run");
    let _ = std::fs::remove_dir_all(&dir);
    write_run(&dir, &out, &ledger.report(), &RunMeta::describe(&cfg, "mock", &out)).unwrap();

    if std::env::args().any(|a| a == "--listen") {
        serve(&dir, "127.0.0.1:8787".parse().unwrap(), None).unwrap();
        return;
    }

    let store = ReviewStore::open(&dir).unwrap();
    let queue = store.queue(DEFAULT_MIN_MALWARE, None);
    for item in &queue {
        println!("{}  {:.2}  {}@{}/{}", item.id, item.triage_priority, item.package, item.version, item.file_path);
    }
    let top = &queue[0];
    store.submit(&top.id, ReviewerVerdict::Malicious, false).unwrap();
    let summary = store.summary();
    println!("{} items, {} reviewed, malware bands {:?}", summary.total, summary.reviewed, summary.malware);
}
