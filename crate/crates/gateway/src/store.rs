//! One JSON file per request at `transcripts/<digest[0:2]>/<digest>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use decisionflow_core::{Stage, Usage};
use serde::{Deserialize, Serialize};

use crate::error::StoreError;
use crate::request::{CacheKey, Completion, CompletionRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRequest {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub attempt: u32,
    pub stage: Stage,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub digest: CacheKey,
    pub request: TranscriptRequest,
    pub response: TranscriptResponse,
    pub recorded_at_unix: u64,
}

impl Transcript {
    pub fn new(request: &CompletionRequest, response: TranscriptResponse) -> Self {
        let recorded_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            digest: request.cache_key(),
            request: TranscriptRequest {
                model: request.model.clone(),
                temperature: request.temperature,
                max_tokens: request.max_tokens,
                attempt: request.attempt,
                stage: request.stage,
                prompt: request.prompt.clone(),
            },
            response,
            recorded_at_unix,
        }
    }

    pub fn to_request(&self) -> CompletionRequest {
        CompletionRequest {
            model: self.request.model.clone(),
            prompt: self.request.prompt.clone(),
            temperature: self.request.temperature,
            max_tokens: self.request.max_tokens,
            stage: self.request.stage,
            attempt: self.request.attempt,
        }
    }

    pub fn to_completion(&self) -> Completion {
        Completion {
            text: self.response.text.clone(),
            usage: self.response.usage,
            latency_secs: self.response.latency_secs,
            cache_hit: true,
            digest: self.digest.clone(),
            transport_attempts: 0,
        }
    }
}

/// Content-addressed transcript corpus, fully indexed at open.
#[derive(Debug)]
pub struct TranscriptStore {
    root: PathBuf,
    entries: RwLock<BTreeMap<CacheKey, Transcript>>,
}

impl TranscriptStore {
    /// Opens (or creates) a corpus rooted at `root`, loading every transcript
    /// and checking that each is filed under its own digest.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let dir = root.join("transcripts");
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        let entries = load_all(&dir)?;
        Ok(Self {
            root,
            entries: RwLock::new(entries),
        })
    }

    /// Opens an existing corpus without creating directories.
    pub fn open_existing(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let dir = root.join("transcripts");
        if !dir.is_dir() {
            return Err(StoreError::Io {
                path: dir,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no transcript directory"),
            });
        }
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<Transcript> {
        self.entries.read().expect("store lock").get(key).cloned()
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.read().expect("store lock").contains_key(key)
    }

    pub fn keys(&self) -> Vec<CacheKey> {
        self.entries.read().expect("store lock").keys().cloned().collect()
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join("transcripts")
            .join(key.shard())
            .join(format!("{key}.json"))
    }

    /// Writes the transcript via a temp file and rename, then indexes it.
    pub fn put(&self, transcript: Transcript) -> Result<(), StoreError> {
        let path = self.path_for(&transcript.digest);
        let dir = path.parent().expect("shard directory").to_path_buf();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&dir).map_err(io)?;
        let mut body = serde_json::to_string_pretty(&transcript).expect("transcript serializes");
        body.push('\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
        tmp.write_all(body.as_bytes()).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.entries
            .write()
            .expect("store lock")
            .insert(transcript.digest.clone(), transcript);
        Ok(())
    }
}

fn load_all(dir: &Path) -> Result<BTreeMap<CacheKey, Transcript>, StoreError> {
    let mut entries = BTreeMap::new();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StoreError::Io { path, source }
    };
    for shard in fs::read_dir(dir).map_err(io(dir))? {
        let shard = shard.map_err(io(dir))?.path();
        if !shard.is_dir() {
            continue;
        }
        for file in fs::read_dir(&shard).map_err(io(&shard))? {
            let path = file.map_err(io(&shard))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path).map_err(io(&path))?;
            let transcript: Transcript =
                serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            let computed = transcript.to_request().cache_key();
            let filed = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let shard_name = shard.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            if computed != transcript.digest
                || computed.as_str() != filed
                || computed.shard() != shard_name
            {
                return Err(StoreError::DigestMismatch {
                    path,
                    filed,
                    computed: computed.to_string(),
                });
            }
            entries.insert(computed, transcript);
        }
    }
    Ok(entries)
}
