//! Package ingestion, size filtering and labeled-dataset manifests.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Component, Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::tokens::estimate_tokens;

/// Default file-count limit of the 75th-percentile package.
pub const QUARTILE_MAX_FILES: usize = 25;
/// Default size limit of the 75th-percentile package (175 KB).
pub const QUARTILE_MAX_SIZE_BYTES: u64 = 175 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt archive {path}: {source}")]
    CorruptArchive {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("archive member `{member}` escapes the package root")]
    Traversal { member: String },
    #[error("duplicate file path `{0}` in package")]
    DuplicatePath(String),
    #[error("manifest line {line}: {message}")]
    ManifestLine { line: usize, message: String },
    #[error("manifest line {line}: referenced path {path} does not exist")]
    MissingPath { line: usize, path: PathBuf },
    #[error("cannot sample {requested} entries from a manifest of {available}")]
    SampleTooLarge { requested: usize, available: usize },
}

/// Ground-truth tag of a package.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malicious,
    Neutral,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Malicious => "malicious",
            Label::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Javascript,
    Manifest,
    Markdown,
    Shell,
    Other,
}

impl FileKind {
    /// Infers the kind from the file name and extension.
    pub fn infer(path: &str) -> FileKind {
        let name = path.rsplit('/').next().unwrap_or(path);
        if name == "package.json" {
            return FileKind::Manifest;
        }
        let ext = match name.rsplit_once('.') {
            Some((stem, ext)) if !stem.is_empty() => ext.to_ascii_lowercase(),
            _ => return FileKind::Other,
        };
        match ext.as_str() {
            "js" | "mjs" | "cjs" | "jsx" | "ts" | "mts" | "cts" | "tsx" => FileKind::Javascript,
            "md" | "markdown" => FileKind::Markdown,
            "sh" | "bash" | "zsh" => FileKind::Shell,
            _ => FileKind::Other,
        }
    }
}

/// One file of a package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    /// Lossy UTF-8 decoding of the raw bytes.
    pub content: String,
    /// Length of the raw bytes.
    pub size_bytes: u64,
    pub kind: FileKind,
    pub token_estimate: usize,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, bytes: &[u8]) -> SourceFile {
        let path = path.into();
        let content = String::from_utf8_lossy(bytes).into_owned();
        SourceFile {
            kind: FileKind::infer(&path),
            token_estimate: estimate_tokens(&content),
            size_bytes: bytes.len() as u64,
            content,
            path,
        }
    }

    pub fn from_text(path: impl Into<String>, text: &str) -> SourceFile {
        SourceFile::new(path, text.as_bytes())
    }

    pub fn line_count(&self) -> usize {
        self.content.lines().count()
    }
}

/// A package under review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageArtifact {
    pub name: String,
    pub version: String,
    pub files: Vec<SourceFile>,
    pub total_size_bytes: u64,
    pub label: Option<Label>,
}

impl PackageArtifact {
    /// Builds an artifact, sorting files by path and checking path invariants.
    pub fn from_files(
        name: impl Into<String>,
        version: impl Into<String>,
        mut files: Vec<SourceFile>,
    ) -> Result<PackageArtifact, CorpusError> {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut seen = BTreeSet::new();
        for f in &files {
            check_member_path(&f.path)?;
            if !seen.insert(f.path.as_str()) {
                return Err(CorpusError::DuplicatePath(f.path.clone()));
            }
        }
        let total_size_bytes = files.iter().map(|f| f.size_bytes).sum();
        Ok(PackageArtifact {
            name: name.into(),
            version: version.into(),
            files,
            total_size_bytes,
            label: None,
        })
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn id(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }

    pub fn manifest(&self) -> Option<&SourceFile> {
        self.file("package.json")
    }
}

fn check_member_path(member: &str) -> Result<(), CorpusError> {
    let p = Path::new(member);
    let bad = member.is_empty()
        || p.components().any(|c| {
            matches!(
                c,
                Component::ParentDir | Component::RootDir | Component::Prefix(_)
            )
        });
    if bad {
        return Err(CorpusError::Traversal {
            member: member.to_string(),
        });
    }
    Ok(())
}

/// Loads a package from a directory or a gzip tarball.
///
/// Tarballs may use the npm `package/` root. Files are ordered
/// lexicographically by path. Name and version come from `package.json`
/// when present, otherwise from the path stem and `0.0.0`.
pub fn load_package(path: &Path) -> Result<PackageArtifact, CorpusError> {
    let meta = fs::metadata(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let files = if meta.is_dir() {
        read_directory(path)?
    } else {
        read_tarball(path)?
    };
    let fallback = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unknown".into());
    let fallback = fallback
        .strip_suffix(".tgz")
        .or_else(|| fallback.strip_suffix(".tar.gz"))
        .unwrap_or(&fallback)
        .to_string();
    let (name, version) = manifest_identity(&files).unwrap_or((fallback, "0.0.0".to_string()));
    PackageArtifact::from_files(name, version, files)
}

fn manifest_identity(files: &[SourceFile]) -> Option<(String, String)> {
    let manifest = files.iter().find(|f| f.path == "package.json")?;
    let value: serde_json::Value = serde_json::from_str(&manifest.content).ok()?;
    let name = value.get("name")?.as_str()?.to_string();
    let version = value
        .get("version")
        .and_then(|v| v.as_str())
        .unwrap_or("0.0.0")
        .to_string();
    Some((name, version))
}

fn read_directory(root: &Path) -> Result<Vec<SourceFile>, CorpusError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.into()),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walkdir yields paths under root");
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path()).map_err(|source| CorpusError::Io {
            path: entry.path().to_path_buf(),
            source,
        })?;
        files.push(SourceFile::new(rel, &bytes));
    }
    Ok(files)
}

fn read_tarball(path: &Path) -> Result<Vec<SourceFile>, CorpusError> {
    let corrupt = |source: io::Error| CorpusError::CorruptArchive {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut archive = tar::Archive::new(GzDecoder::new(file));
    let mut members = Vec::new();
    for entry in archive.entries().map_err(corrupt)? {
        let mut entry = entry.map_err(corrupt)?;
        let member = String::from_utf8_lossy(&entry.path_bytes()).into_owned();
        check_member_path(&member)?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).map_err(corrupt)?;
        let member = member.trim_start_matches("./").to_string();
        members.push((member, bytes));
    }
    let strip = !members.is_empty() && members.iter().all(|(m, _)| m.starts_with("package/"));
    Ok(members
        .into_iter()
        .map(|(m, bytes)| {
            let rel = if strip { &m["package/".len()..] } else { &m[..] };
            SourceFile::new(rel, &bytes)
        })
        .collect())
}

/// True iff the package falls inside the 75th-percentile envelope: at most
/// `max_files` files or at most `max_size_bytes` bytes.
pub fn within_quartile_filter(pkg: &PackageArtifact, max_files: usize, max_size_bytes: u64) -> bool {
    pkg.files.len() <= max_files || pkg.total_size_bytes <= max_size_bytes
}

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub name: String,
    pub version: String,
}

impl ManifestEntry {
    pub fn id(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }

    /// Loads the referenced package, taking name, version and label from the entry.
    pub fn load(&self) -> Result<PackageArtifact, CorpusError> {
        let mut pkg = load_package(&self.path)?;
        pkg.name = self.name.clone();
        pkg.version = self.version.clone();
        pkg.label = Some(self.label);
        Ok(pkg)
    }
}

/// Labeled dataset: a JSON-lines file with one [`ManifestEntry`] per line.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<DatasetManifest, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        DatasetManifest::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<DatasetManifest, CorpusError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: ManifestEntry =
                serde_json::from_str(line).map_err(|e| CorpusError::ManifestLine {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
            if !entry.path.exists() {
                return Err(CorpusError::MissingPath {
                    line: line_no,
                    path: entry.path,
                });
            }
            entries.push(entry);
        }
        Ok(DatasetManifest { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_of(&self, name: &str, version: &str) -> Option<Label> {
        self.entries
            .iter()
            .find(|e| e.name == name && e.version == version)
            .map(|e| e.label)
    }

    /// Content digest over (name, version, label) of every entry; paths are
    /// excluded so a relocated corpus keeps its identity.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(e.name.as_bytes());
            hasher.update([0]);
            hasher.update(e.version.as_bytes());
            hasher.update([0]);
            hasher.update(e.label.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Parameters of stratified inverse sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingOptions {
    pub max_files: usize,
    pub max_size_bytes: u64,
    /// Inclusion weight of packages inside the quartile envelope.
    pub below_weight: f64,
    /// Inclusion weight of packages outside it.
    pub above_weight: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            max_files: QUARTILE_MAX_FILES,
            max_size_bytes: QUARTILE_MAX_SIZE_BYTES,
            below_weight: 3.0,
            above_weight: 1.0,
        }
    }
}

/// Samples `target_count` entries stratified by label, favoring packages
/// inside the quartile envelope. Returned entries keep manifest order.
pub fn sample_stratified(
    manifest: &DatasetManifest,
    seed: u64,
    target_count: usize,
    options: &SamplingOptions,
) -> Result<Vec<ManifestEntry>, CorpusError> {
    if target_count > manifest.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: target_count,
            available: manifest.len(),
        });
    }
    let mut strata = Vec::with_capacity(manifest.len());
    for entry in &manifest.entries {
        let pkg = load_package(&entry.path)?;
        let below = within_quartile_filter(&pkg, options.max_files, options.max_size_bytes);
        strata.push((entry.label, below));
    }
    let picked = stratified_indices(&strata, seed, target_count, options)?;
    Ok(picked
        .into_iter()
        .map(|i| manifest.entries[i].clone())
        .collect())
}

/// Index-level core of [`sample_stratified`]: `items[i]` is the label and
/// quartile membership of entry `i`. Returns sorted indices.
pub fn stratified_indices(
    items: &[(Label, bool)],
    seed: u64,
    target_count: usize,
    options: &SamplingOptions,
) -> Result<Vec<usize>, CorpusError> {
    let total = items.len();
    if target_count > total {
        return Err(CorpusError::SampleTooLarge {
            requested: target_count,
            available: total,
        });
    }
    if target_count == 0 {
        return Ok(Vec::new());
    }

    let labels = [Label::Malicious, Label::Neutral];
    let members: Vec<Vec<usize>> = labels
        .iter()
        .map(|l| (0..total).filter(|&i| items[i].0 == *l).collect())
        .collect();

    // Largest-remainder apportionment keeps each stratum within one entry
    // of its exact proportional share.
    let mut quotas: Vec<usize> = members
        .iter()
        .map(|m| target_count * m.len() / total)
        .collect();
    let mut remainders: Vec<(usize, usize)> = members
        .iter()
        .enumerate()
        .map(|(i, m)| ((target_count * m.len()) % total, i))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = target_count - quotas.iter().sum::<usize>();
    for (rem, i) in remainders {
        if left == 0 {
            break;
        }
        if rem > 0 {
            quotas[i] += 1;
            left -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(target_count);
    for (stratum, quota) in members.iter().zip(quotas) {
        if quota == stratum.len() {
            picked.extend_from_slice(stratum);
            continue;
        }
        let chosen = stratum
            .choose_multiple_weighted(&mut rng, quota, |&i| {
                if items[i].1 {
                    options.below_weight
                } else {
                    options.above_weight
                }
            })
            .expect("sampling weights are positive and finite");
        picked.extend(chosen.copied());
    }
    picked.sort_unstable();
    Ok(picked)
}
