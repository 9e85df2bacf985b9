//! Record/replay of backend replies keyed by request fingerprint.
//!
//! The corpus on disk is one pretty-printed JSON file per fingerprint,
//! holding the request that produced it and the verbatim reply.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    BackendDescriptor, BackendKind, ChatBackend, ChatMessage, GatewayError, GenerationParams,
    fingerprint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Every request goes to the inner backend; replies are stored.
    Record,
    /// Only stored replies are served; unknown requests fail.
    Replay,
    /// Stored replies are served; misses go to the inner backend and are stored.
    Passthrough,
}

impl FromStr for ReplayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "record" => Ok(ReplayMode::Record),
            "replay" => Ok(ReplayMode::Replay),
            "passthrough" => Ok(ReplayMode::Passthrough),
            other => Err(format!("unknown replay mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordedRequest {
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayEntry {
    pub fingerprint: String,
    pub request: RecordedRequest,
    pub reply: String,
}

pub struct ReplayStore {
    dir: PathBuf,
    mode: ReplayMode,
    entries: Mutex<BTreeMap<String, ReplayEntry>>,
}

fn storage(err: impl std::fmt::Display) -> GatewayError {
    GatewayError::Storage(err.to_string())
}

impl ReplayStore {
    /// Opens (creating if needed) the corpus directory and loads its entries.
    pub fn open(dir: impl AsRef<Path>, mode: ReplayMode) -> Result<Self, GatewayError> {
        let dir = dir.as_ref().to_path_buf();
        if mode != ReplayMode::Replay {
            fs::create_dir_all(&dir).map_err(storage)?;
        }
        let mut entries = BTreeMap::new();
        if dir.is_dir() {
            for item in fs::read_dir(&dir).map_err(storage)? {
                let path = item.map_err(storage)?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    let text = fs::read_to_string(&path).map_err(storage)?;
                    let entry: ReplayEntry = serde_json::from_str(&text)
                        .map_err(|e| storage(format!("{}: {e}", path.display())))?;
                    entries.insert(entry.fingerprint.clone(), entry);
                }
            }
        }
        Ok(Self {
            dir,
            mode,
            entries: Mutex::new(entries),
        })
    }

    pub fn mode(&self) -> ReplayMode {
        self.mode
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("replay lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, messages: &[ChatMessage], params: &GenerationParams) -> Option<String> {
        let key = fingerprint(messages, params);
        self.entries
            .lock()
            .expect("replay lock")
            .get(&key)
            .map(|e| e.reply.clone())
    }

    /// Stores `reply` under the request's fingerprint, replacing any earlier
    /// entry. Not permitted in replay mode.
    pub fn record(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
        reply: &str,
    ) -> Result<(), GatewayError> {
        if self.mode == ReplayMode::Replay {
            return Err(GatewayError::Storage(
                "cannot record while the store is in replay mode".into(),
            ));
        }
        let key = fingerprint(messages, params);
        let entry = ReplayEntry {
            fingerprint: key.clone(),
            request: RecordedRequest {
                model_id: params.model_id.clone(),
                temperature: params.temperature,
                seed: params.seed,
                messages: messages.to_vec(),
            },
            reply: reply.to_owned(),
        };
        let mut entries = self.entries.lock().expect("replay lock");
        let path = self.dir.join(format!("{key}.json"));
        let tmp = self.dir.join(format!(".{key}.json.tmp"));
        let mut text = serde_json::to_string_pretty(&entry).map_err(storage)?;
        text.push('\n');
        fs::write(&tmp, text).map_err(storage)?;
        fs::rename(&tmp, &path).map_err(storage)?;
        entries.insert(key, entry);
        Ok(())
    }
}

/// Backend that serves and/or records replies through a [`ReplayStore`].
pub struct ReplayBackend {
    descriptor: BackendDescriptor,
    store: Arc<ReplayStore>,
    inner: Option<Arc<dyn ChatBackend>>,
}

impl ReplayBackend {
    pub fn new(
        descriptor: BackendDescriptor,
        store: Arc<ReplayStore>,
        inner: Option<Arc<dyn ChatBackend>>,
    ) -> Self {
        let descriptor = BackendDescriptor {
            kind: BackendKind::Replay,
            ..descriptor
        };
        Self {
            descriptor,
            store,
            inner,
        }
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }

    fn forward(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<ChatMessage, GatewayError> {
        let inner = self.inner.as_ref().ok_or_else(|| {
            GatewayError::Storage(format!(
                "{:?} mode needs a live backend to forward to",
                self.store.mode()
            ))
        })?;
        let reply = inner.complete(messages, params)?;
        self.store.record(messages, params, &reply.content)?;
        Ok(reply)
    }
}

impl ChatBackend for ReplayBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<ChatMessage, GatewayError> {
        match self.store.mode() {
            ReplayMode::Record => self.forward(messages, params),
            ReplayMode::Replay => self
                .store
                .lookup(messages, params)
                .map(ChatMessage::assistant)
                .ok_or_else(|| GatewayError::ReplayMiss {
                    fingerprint: fingerprint(messages, params),
                }),
            ReplayMode::Passthrough => match self.store.lookup(messages, params) {
                Some(reply) => Ok(ChatMessage::assistant(reply)),
                None => self.forward(messages, params),
            },
        }
    }
}
