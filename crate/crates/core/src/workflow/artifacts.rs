use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LoadFailure, Mode, PackageVerdict, PipelineConfig, RunCounters, RunOutput};
use crate::llmclient::CostSummary;
use crate::prompts::{prompt_checksums, Profile};

pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const LEDGER_FILE: &str = "ledger.json";
pub const META_FILE: &str = "run_meta.json";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

/// Everything about a run except its verdicts and costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub created_at: String,
    pub tool_version: String,
    pub mode: Mode,
    pub backend: String,
    pub profile: Profile,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_digest: Option<String>,
    pub prompt_checksums: BTreeMap<String, String>,
    pub rule_count: usize,
    pub counters: RunCounters,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub load_failures: Vec<LoadFailure>,
}

impl RunMeta {
    /// Metadata for `output` produced under `config`. Seed and manifest
    /// digest are left for the caller.
    pub fn describe(config: &PipelineConfig, backend: &str, output: &RunOutput) -> RunMeta {
        RunMeta {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            mode: config.mode,
            backend: backend.to_string(),
            profile: config.profile.clone(),
            threshold: config.threshold,
            seed: None,
            manifest_digest: None,
            prompt_checksums: prompt_checksums()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            rule_count: config.rules.len(),
            counters: output.counters,
            load_failures: output.load_failures.clone(),
        }
    }
}

/// A run directory read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub verdicts: Vec<PackageVerdict>,
    pub ledger: CostSummary,
    pub meta: RunMeta,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `verdicts.jsonl` (one verdict per line, input order), `ledger.json`
/// and `run_meta.json` into `dir`. Only `run_meta.json` carries a timestamp.
pub fn write_run(dir: &Path, output: &RunOutput, ledger: &CostSummary, meta: &RunMeta) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(VERDICTS_FILE);
    let mut buf = Vec::new();
    for v in &output.verdicts {
        serde_json::to_writer(&mut buf, v).expect("verdicts are serializable");
        buf.push(b'\n');
    }
    fs::write(&path, buf).map_err(io_err(&path))?;

    for (name, value) in [
        (LEDGER_FILE, serde_json::to_value(ledger)),
        (META_FILE, serde_json::to_value(meta)),
    ] {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(io_err(&path))?;
        let value = value.expect("artifact is serializable");
        serde_json::to_writer_pretty(&mut f, &value).expect("artifact is serializable");
        f.write_all(b"\n").map_err(io_err(&path))?;
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn read_verdicts(path: &Path) -> Result<Vec<PackageVerdict>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ArtifactError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_run(dir: &Path) -> Result<RunArtifacts, ArtifactError> {
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        verdicts: read_verdicts(&dir.join(VERDICTS_FILE))?,
        ledger: read_json(&dir.join(LEDGER_FILE))?,
        meta: read_json(&dir.join(META_FILE))?,
    })
}
