use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError};

#[derive(Debug, thiserror::Error)]
pub enum CassetteError {
    #[error("cannot access cassette {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed cassette {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteMetadata {
    pub created_at: String,
    pub model_id: String,
}

/// A recorded response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub texts: Vec<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model_id: String,
}

/// Recorded responses keyed by request key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cassette {
    pub metadata: CassetteMetadata,
    pub entries: BTreeMap<String, CassetteEntry>,
}

impl Cassette {
    pub fn new(model_id: &str) -> Cassette {
        Cassette {
            metadata: CassetteMetadata {
                created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                model_id: model_id.to_string(),
            },
            entries: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Cassette, CassetteError> {
        let text = std::fs::read_to_string(path).map_err(|source| CassetteError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CassetteError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CassetteError> {
        let io = |source| CassetteError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut text = serde_json::to_string_pretty(self).expect("cassette is serializable");
        text.push('\n');
        std::fs::write(path, text).map_err(io)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Answers requests from a cassette only.
#[derive(Debug)]
pub struct ReplayBackend {
    cassette: Cassette,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> ReplayBackend {
        ReplayBackend { cassette }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = req.request_key();
        match self.cassette.entries.get(&key) {
            Some(e) => Ok(ChatResponse {
                texts: e.texts.clone(),
                prompt_tokens: e.prompt_tokens,
                completion_tokens: e.completion_tokens,
                model_id: e.model_id.clone(),
            }),
            None => Err(LlmError::CassetteMiss { key }),
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Wraps a backend and stores every non-empty response in a cassette.
pub struct RecordingBackend {
    inner: Arc<dyn ChatBackend>,
    cassette: Arc<Mutex<Cassette>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn ChatBackend>, cassette: Arc<Mutex<Cassette>>) -> RecordingBackend {
        RecordingBackend { inner, cassette }
    }

    pub fn cassette(&self) -> Arc<Mutex<Cassette>> {
        self.cassette.clone()
    }
}

impl ChatBackend for RecordingBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let resp = self.inner.complete(req)?;
        if resp.texts.iter().any(|t| !t.trim().is_empty()) {
            self.cassette.lock().unwrap().entries.insert(
                req.request_key(),
                CassetteEntry {
                    texts: resp.texts.clone(),
                    prompt_tokens: resp.prompt_tokens,
                    completion_tokens: resp.completion_tokens,
                    model_id: resp.model_id.clone(),
                },
            );
        }
        Ok(resp)
    }

    fn name(&self) -> &'static str {
        self.inner.name()
    }
}
