//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use pkgsentry::corpus::{load_package, Label};
use pkgsentry::evalharness::{compare_runs, ConfusionMatrix, RunTotals};
use pkgsentry::llmclient::{Cassette, RecordingBackend, ReplayBackend};
use pkgsentry::money::Money;
use pkgsentry::prescreen::{categories, Category};
use pkgsentry::prompts::{prompt_checksums, Profile, StageConfig};
use pkgsentry::reportjson::parse_report;
use pkgsentry::workflow::{run_packages, write_run, Mode, PipelineConfig, RunMeta, VERDICTS_FILE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{client_for, corpus_manifest, golden_dir, malformed, mock_backend, props, scan_corpus};

const TABLE4_BUDGET: Duration = Duration::from_secs(1);
const RQ2_BUDGET: Duration = Duration::from_secs(1);
const GOLDEN_BUDGET: Duration = Duration::from_secs(5);
const DETERMINISM_BUDGET: Duration = Duration::from_secs(60);
const PARSER_BUDGET: Duration = Duration::from_secs(30);
/// No stated bound; generous so a slow debug build still passes honestly.
const UNBOUNDED: Duration = Duration::from_secs(600);

const MIN_MALFORMED_CASES: usize = 30;
const FUZZ_INPUTS: usize = 10_000;
const MIN_PROPERTY_CASES: u32 = 1000;

/// Matrices as `tp,tn,fp,fn` and the expected display line for each.
const TABLE4: [(&str, &str); 3] = [
    ("2117,2254,684,60", "P=0.75 R=0.97 F1=0.85"),
    ("2128,2740,195,52", "P=0.91 R=0.97 F1=0.94"),
    ("2089,2932,3,90", "P=0.99 R=0.95 F1=0.97"),
];

const PROMPT_SHA256: [(&str, &str); 4] = [
    ("critique_system", "d376c3da21a354d30cdd5ba826a5ad41bafa006ea0f70cb3b848e2c748c86043"),
    ("final_system", "179f056eb7f9f0331ff456fadc20212c9ec12fbabde55940395b36185fd52d65"),
    ("initial_system", "5184af250252a44a1f6eb0e07685fafc830ee74514df57e54edd9ef3a0b19a9d"),
    ("user_instruction", "a7563e223b3434b553cefa31b7253025f9e33a0fe8aeda864d900433021f6319"),
];

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, Duration, Check); 8] = [
        ("table4-metrics", TABLE4_BUDGET, table4_metrics),
        ("rq2-reductions", RQ2_BUDGET, rq2_reductions),
        ("golden-fixture", GOLDEN_BUDGET, golden_fixture),
        ("corpus-determinism", DETERMINISM_BUDGET, corpus_determinism),
        ("record-replay", UNBOUNDED, record_replay),
        ("parser-robustness", PARSER_BUDGET, parser_robustness),
        ("property-suites", UNBOUNDED, property_suites),
        ("stage-conformance", UNBOUNDED, stage_conformance),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn table4_metrics() -> Result<String, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pkgsentry"));
    cmd.arg("eval");
    for (m, _) in TABLE4 {
        cmd.args(["--matrix", m]);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("eval exited with {}", out.status))?;
    let expected: String = TABLE4.iter().map(|(m, line)| format!("{m}: {line}\n")).collect();
    let got = String::from_utf8_lossy(&out.stdout);
    ensure(got == expected, || format!("got {got:?}"))?;
    Ok("9/9 values match".into())
}

fn rq2_reductions() -> Result<String, String> {
    let dollars = |s: &str| Money::from_dollars(s).unwrap();
    let full = RunTotals {
        manifest_digest: None,
        files_analyzed: 18_754,
        costs: [("gpt-3.5".to_string(), dollars("125.65")), ("gpt-4".to_string(), dollars("2013.84"))].into(),
    };
    let prescreened = RunTotals {
        manifest_digest: None,
        files_analyzed: 4_146,
        costs: [("gpt-3.5".to_string(), dollars("49.13")), ("gpt-4".to_string(), dollars("482.46"))].into(),
    };
    let r = compare_runs(&full, &prescreened).map_err(|e| e.to_string())?;
    let got = (r.files.percent(), r.costs["gpt-3.5"].percent(), r.costs["gpt-4"].percent());
    ensure(got == ("77.9%".into(), "60.9%".into(), "76.1%".into()), || format!("got {got:?}"))?;
    Ok(format!("files {}, gpt-3.5 {}, gpt-4 {}", got.0, got.1, got.2))
}

fn golden_fixture() -> Result<String, String> {
    let pkg = load_package(&golden_dir()).map_err(|e| e.to_string())?;
    let profile = Profile::builtin("gpt-4").unwrap();
    let client = client_for(mock_backend(), &profile);
    let out = run_packages(&[pkg], &PipelineConfig::new(profile, Mode::Full), &client);
    let v = &out.verdicts[0];
    let script = v
        .file_analyses
        .iter()
        .find(|a| a.file_path == "build.sh")
        .ok_or("build.sh missing")?;
    let cats = categories(&script.findings);
    ensure(cats.len() >= 3 && cats.contains(&Category::Network), || format!("categories {cats:?}"))?;
    let malware = script.final_report().map(|r| r.malware);
    ensure(malware == Some(1.0), || format!("final malware {malware:?}"))?;
    ensure(v.is_malicious, || "rollup not malicious".into())?;
    let names: Vec<&str> = cats.iter().map(|c| c.as_str()).collect();
    Ok(format!("{} categories ({}), malware 1.0, malicious", cats.len(), names.join(", ")))
}

fn corpus_determinism() -> Result<String, String> {
    let manifest = corpus_manifest();
    let malicious: Vec<_> = manifest.entries.iter().filter(|e| e.label == Label::Malicious).collect();
    ensure(malicious.len() >= 10 && manifest.len() - malicious.len() >= 30, || {
        format!("{} malicious of {}", malicious.len(), manifest.len())
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut first = None;
    for round in 0..2 {
        let (out, client) = scan_corpus(mock_backend(), Mode::Full);
        let cfg = PipelineConfig::new(Profile::builtin("gpt-4").unwrap(), Mode::Full);
        let meta = RunMeta::describe(&cfg, "mock", &out);
        let run = dir.path().join(format!("run{round}"));
        write_run(&run, &out, &client.ledger().report(), &meta).map_err(|e| e.to_string())?;
        files.push(std::fs::read(run.join(VERDICTS_FILE)).map_err(|e| e.to_string())?);
        first.get_or_insert(out);
    }
    ensure(files[0] == files[1], || "verdicts.jsonl differs between runs".into())?;

    let out = first.unwrap();
    let seeded: BTreeSet<Category> = out
        .verdicts
        .iter()
        .filter(|v| v.label == Some(Label::Malicious))
        .flat_map(|v| v.file_analyses.iter().flat_map(|a| categories(&a.findings)))
        .collect();
    ensure(seeded.len() == Category::ALL.len(), || format!("malicious categories {seeded:?}"))?;
    let cm = ConfusionMatrix::from_verdicts(&out.verdicts, Some(&manifest)).map_err(|e| e.to_string())?;
    ensure(cm.fp == 0 && cm.fn_ == 0, || format!("{cm:?}"))?;
    Ok(format!(
        "{} packages, {} bytes identical, tp={} tn={} fp=0 fn=0",
        manifest.len(),
        files[0].len(),
        cm.tp,
        cm.tn
    ))
}

fn record_replay() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("cassette.json");
    let tape = Arc::new(Mutex::new(Cassette::new("gpt-4")));
    let (recorded, rec) = scan_corpus(Arc::new(RecordingBackend::new(mock_backend(), tape.clone())), Mode::Full);
    tape.lock().unwrap().save(&path).map_err(|e| e.to_string())?;
    let cassette = Cassette::load(&path).map_err(|e| e.to_string())?;
    let entries = cassette.len();
    let (replayed, rep) = scan_corpus(Arc::new(ReplayBackend::new(cassette)), Mode::Full);
    ensure(recorded.verdicts == replayed.verdicts, || "verdicts differ".into())?;
    let (a, b) = (rec.ledger().report(), rep.ledger().report());
    ensure(a == b, || format!("ledger drift: {} vs {}", a.total_cost, b.total_cost))?;
    Ok(format!("{entries} cassette entries, {} calls, cost {} both ways", a.calls, a.total_cost))
}

fn parser_robustness() -> Result<String, String> {
    let corpus = malformed::corpus();
    ensure(corpus.cases.len() >= MIN_MALFORMED_CASES, || format!("{} cases", corpus.cases.len()))?;
    let failures: Vec<String> = corpus
        .cases
        .iter()
        .filter_map(|c| malformed::check_case(c).err().map(|e| format!("{}: {e}", c.name)))
        .collect();
    ensure(failures.is_empty(), || failures.join("; "))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut crashes = 0;
    for _ in 0..FUZZ_INPUTS {
        let len = rng.gen_range(0..512);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if catch_unwind(|| parse_report(&text)).is_err() {
            crashes += 1;
        }
    }
    ensure(crashes == 0, || format!("{crashes} crashes"))?;
    Ok(format!("{} corpus cases as expected, {FUZZ_INPUTS} fuzz inputs, 0 crashes", corpus.cases.len()))
}

fn property_suites() -> Result<String, String> {
    let mut counts = Vec::new();
    for (name, suite) in props::SUITES {
        let n = suite().map_err(|e| format!("{name}: {e}"))?;
        ensure(n >= MIN_PROPERTY_CASES, || format!("{name}: only {n} cases"))?;
        counts.push(format!("{name} {n}"));
    }
    Ok(counts.join(", "))
}

fn stage_conformance() -> Result<String, String> {
    let sums = prompt_checksums();
    for (name, want) in PROMPT_SHA256 {
        ensure(sums.get(name).map(String::as_str) == Some(want), || format!("{name} checksum changed"))?;
    }
    let params = |s: &StageConfig| (s.n_reports, s.temperature, s.top_p);
    for (profile, n) in [("gpt-3.5", 5), ("gpt-4", 3)] {
        let st = Profile::builtin(profile).ok_or("missing profile")?.stages;
        let got = [params(&st.initial), params(&st.critique), params(&st.final_)];
        let want = [(n, 1.0, 0.9), (n, 0.75, 0.6), (1, 0.5, 0.5)];
        ensure(got == want, || format!("{profile}: {got:?}"))?;
    }
    Ok("4 prompt checksums; (1.0/0.9) (0.75/0.6) (0.5/0.5); n 5/5/1 and 3/3/1".into())
}
