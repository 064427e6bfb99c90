//! The `pkgsentry` command line: `scan`, `eval` and `serve`.

pub mod serve;

use std::ffi::OsString;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{load_package, sample_stratified, DatasetManifest, SamplingOptions};
use crate::evalharness::{compare_runs, ConfusionMatrix, EvalReport, EvalRow, RunTotals};
use crate::llmclient::{
    Cassette, ChatBackend, CostLedger, LiveBackend, LlmClient, MockAnalyst, RateLimiter, RecordingBackend,
    ReplayBackend, API_KEY_ENV,
};
use crate::money::Money;
use crate::prescreen::RuleSet;
use crate::prompts::load_profile;
use crate::workflow::{read_run, run_packages, run_pipeline, write_run, Mode, PipelineConfig, RunMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

fn config<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "pkgsentry", version, about = "Malicious npm package detection with staged LLM review")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a dataset manifest or a single package.
    Scan(ScanArgs),
    /// Compute metrics and reductions from runs or hand-entered numbers.
    Eval(EvalArgs),
    /// Serve the review queue of a run over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Replay,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Prescreened,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Manifest (`.jsonl`), package directory or `.tgz` tarball.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
    /// Cassette to replay from, or to write with `--record`.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Record every response of the mock or live backend into `--cassette`.
    #[arg(long)]
    pub record: bool,
    /// Profile file or built-in name (gpt-3.5, gpt-4).
    #[arg(long, default_value = "gpt-4")]
    pub profile: String,
    /// Rule file replacing the built-in rules.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value = "pkgsentry-run")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
    /// Seed of `--sample`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Analyze a stratified sample of this many manifest entries.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Package malware threshold (strictly above is malicious).
    #[arg(long, default_value_t = crate::workflow::DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directories.
    pub runs: Vec<PathBuf>,
    /// Labels for the runs; defaults to the labels stored in the verdicts.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Hand-entered confusion matrix `tp,tn,fp,fn`. Repeatable.
    #[arg(long, value_name = "TP,TN,FP,FN")]
    pub matrix: Vec<String>,
    /// Treat the two runs as full and prescreened and report reductions.
    #[arg(long)]
    pub compare: bool,
    /// Hand-entered file counts `before:after`.
    #[arg(long, value_name = "BEFORE:AFTER")]
    pub reduce: Option<String>,
    /// Hand-entered model cost `model=before:after`, in dollars. Repeatable.
    #[arg(long, value_name = "MODEL=BEFORE:AFTER")]
    pub reduce_cost: Vec<String>,
    /// Directory for `eval.md` and `eval.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Built review UI to host at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(&a),
        Command::Eval(a) => cmd_eval(&a).map(|()| EXIT_OK),
        Command::Serve(a) => cmd_serve(&a).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn base_backend(args: &ScanArgs, rules: &RuleSet, base_url: Option<&str>) -> Result<Arc<dyn ChatBackend>, CliError> {
    Ok(match args.backend {
        BackendKind::Mock => Arc::new(MockAnalyst::new(rules.clone())),
        BackendKind::Replay => {
            let path = args.cassette.as_ref().expect("checked by caller");
            Arc::new(ReplayBackend::new(Cassette::load(path).map_err(config)?))
        }
        BackendKind::Live => {
            let key = std::env::var(API_KEY_ENV)
                .ok()
                .filter(|k| !k.trim().is_empty())
                .ok_or_else(|| CliError::Config(format!("the live backend needs {API_KEY_ENV} to be set")))?;
            let url = base_url.ok_or_else(|| CliError::Config("the profile has no base_url for the live backend".into()))?;
            Arc::new(LiveBackend::new(url, &key, Duration::from_secs(180)).map_err(config)?)
        }
    })
}

/// Runs `scan`; returns 0, or 3 when some package or file failed.
pub fn cmd_scan(args: &ScanArgs) -> Result<i32, CliError> {
    if args.backend == BackendKind::Replay && args.cassette.is_none() {
        return Err(CliError::Usage("--backend replay requires --cassette".into()));
    }
    if args.record && (args.cassette.is_none() || args.backend == BackendKind::Replay) {
        return Err(CliError::Usage("--record requires --cassette and the mock or live backend".into()));
    }
    if args.parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage("--threshold must be within [0, 1]".into()));
    }

    let profile = load_profile(&args.profile).map_err(config)?;
    let rules = match &args.rules {
        Some(p) => RuleSet::load(p).map_err(config)?,
        None => RuleSet::builtin(),
    };

    let mut backend = base_backend(args, &rules, profile.model.base_url.as_deref())?;
    let backend_name = backend.name();
    let recording = if args.record {
        let cassette = Arc::new(Mutex::new(Cassette::new(&profile.model.model_id)));
        backend = Arc::new(RecordingBackend::new(backend, cassette.clone()));
        Some(cassette)
    } else {
        None
    };
    let ledger = Arc::new(CostLedger::for_profile(&profile.model));
    let mut client = LlmClient::new(backend, ledger.clone());
    if args.backend == BackendKind::Live {
        if let Some(rpm) = profile.model.requests_per_minute {
            client = client.with_rate_limiter(Arc::new(RateLimiter::per_minute(rpm)));
        }
    }

    let mut cfg = PipelineConfig::new(profile, if args.mode == ModeArg::Full { Mode::Full } else { Mode::Prescreened });
    cfg.rules = rules;
    cfg.parallelism = args.parallelism;
    cfg.threshold = args.threshold;

    let is_manifest = args.input.extension().is_some_and(|e| e == "jsonl");
    let (output, digest) = if is_manifest {
        let manifest = DatasetManifest::load(&args.input).map_err(config)?;
        let entries = match args.sample {
            Some(n) => sample_stratified(&manifest, args.seed, n, &SamplingOptions::default()).map_err(config)?,
            None => manifest.entries.clone(),
        };
        let digest = match args.sample {
            Some(_) => DatasetManifest { entries: entries.clone() }.digest(),
            None => manifest.digest(),
        };
        (run_pipeline(&entries, &cfg, &client), Some(digest))
    } else {
        if args.sample.is_some() {
            return Err(CliError::Usage("--sample needs a manifest input".into()));
        }
        let pkg = load_package(&args.input).map_err(config)?;
        (run_packages(&[pkg], &cfg, &client), None)
    };

    let mut meta = RunMeta::describe(&cfg, backend_name, &output);
    meta.seed = args.sample.map(|_| args.seed);
    meta.manifest_digest = digest;
    let costs = ledger.report();
    write_run(&args.out, &output, &costs, &meta).map_err(config)?;
    if let (Some(cassette), Some(path)) = (recording, &args.cassette) {
        cassette.lock().unwrap().save(path).map_err(config)?;
    }

    let c = &output.counters;
    println!(
        "packages: {} ({} malicious, {} failed to load)",
        c.packages_total, c.packages_malicious, c.packages_failed_to_load
    );
    println!(
        "files: {} total, {} flagged, {} analyzed, {} skipped, {} not selected, {} failed",
        c.files_total, c.files_flagged, c.files_analyzed, c.files_skipped, c.files_not_selected, c.files_failed
    );
    println!("cost: {} over {} calls", costs.total_cost, costs.calls);
    println!("run written to {}", args.out.display());
    for f in &output.load_failures {
        eprintln!("load failure: {}: {}", f.path, f.error);
    }
    Ok(if c.files_failed > 0 || c.packages_failed_to_load > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

fn split_pair<'a>(s: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    s.split_once(':')
        .ok_or_else(|| CliError::Usage(format!("{what} must look like BEFORE:AFTER, got `{s}`")))
}

/// Builds the eval report described by `args`.
pub fn eval_report(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let mut rows = Vec::new();
    for m in &args.matrix {
        let cm: ConfusionMatrix = m.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        rows.push(EvalRow::new(m.clone(), cm));
    }

    let manifest = match &args.manifest {
        Some(p) => Some(DatasetManifest::load(p).map_err(config)?),
        None => None,
    };
    let mut runs = Vec::new();
    for dir in &args.runs {
        let run = read_run(dir).map_err(config)?;
        let cm = ConfusionMatrix::from_run(&run, manifest.as_ref()).map_err(config)?;
        rows.push(EvalRow::new(dir.display().to_string(), cm));
        runs.push(run);
    }

    let reduction = if args.compare {
        let [full, pre] = &runs[..] else {
            return Err(CliError::Usage("--compare needs exactly two runs: full, then prescreened".into()));
        };
        Some(compare_runs(&RunTotals::from_run(full), &RunTotals::from_run(pre)).map_err(config)?)
    } else if args.reduce.is_some() || !args.reduce_cost.is_empty() {
        let (mut full, mut pre) = (RunTotals::default(), RunTotals::default());
        if let Some(r) = &args.reduce {
            let (b, a) = split_pair(r, "--reduce")?;
            let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| CliError::Usage(format!("bad file count `{s}`")));
            full.files_analyzed = parse(b)?;
            pre.files_analyzed = parse(a)?;
        }
        for spec in &args.reduce_cost {
            let (model, pair) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--reduce-cost must look like MODEL=BEFORE:AFTER, got `{spec}`")))?;
            let (b, a) = split_pair(pair, "--reduce-cost")?;
            let money = |s: &str| Money::from_dollars(s).map_err(|e| CliError::Usage(e.to_string()));
            full.costs.insert(model.to_string(), money(b)?);
            pre.costs.insert(model.to_string(), money(a)?);
        }
        if args.reduce.is_none() {
            // Cost-only comparison: any equal counts keep the file check quiet.
            full.files_analyzed = 1;
            pre.files_analyzed = 1;
        }
        Some(compare_runs(&full, &pre).map_err(config)?)
    } else {
        None
    };

    if rows.is_empty() && reduction.is_none() {
        return Err(CliError::Usage("nothing to evaluate: give run directories, --matrix or --reduce".into()));
    }
    Ok(EvalReport { rows, reduction })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let report = eval_report(args)?;
    for r in &report.rows {
        println!("{}: {}", r.name, r.metrics);
    }
    if let Some(red) = &report.reduction {
        if args.reduce.is_some() || args.compare {
            println!(
                "files analyzed: {} -> {} ({} reduction)",
                red.files.before,
                red.files.after,
                red.files.percent()
            );
        }
        for (model, c) in &red.costs {
            println!("cost {model}: {} -> {} ({} reduction)", c.before, c.after, c.percent());
        }
    }
    if let Some(dir) = &args.out {
        write_eval(dir, &report).map_err(config)?;
    }
    Ok(())
}

fn write_eval(dir: &Path, report: &EvalReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("eval.md"), report.to_markdown())?;
    let mut json = serde_json::to_string_pretty(report).expect("report is serializable");
    json.push('\n');
    std::fs::write(dir.join("eval.json"), json)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    serve::serve(
        &args.run_dir,
        SocketAddr::new(args.host, args.port),
        args.ui_dir.as_deref(),
    )
    .map_err(config)
}
