//! On-disk session documents and append-only transcripts.
//!
//! Layout under the store root:
//!
//! ```text
//! sessions/<id>/session.json      latest session document
//! sessions/<id>/transcript.jsonl  one transcript entry per line
//! sessions/<id>/replay-ref.txt    replay corpus the session ran against (optional)
//! current                         id of the most recently used session
//! ```

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Session, SessionId, SessionPhase};

pub const SCHEMA_VERSION: u32 = 1;

const SESSIONS_DIR: &str = "sessions";
const SESSION_FILE: &str = "session.json";
const TRANSCRIPT_FILE: &str = "transcript.jsonl";
const REPLAY_REF_FILE: &str = "replay-ref.txt";
const CURRENT_FILE: &str = "current";
const ID_PREFIX: &str = "session-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    User,
    Assistant,
    System,
    Engine,
}

impl Actor {
    pub fn label(self) -> &'static str {
        match self {
            Actor::User => "USER",
            Actor::Assistant => "ASSISTANT",
            Actor::System => "SYSTEM",
            Actor::Engine => "ENGINE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub at: DateTime<Utc>,
    pub actor: Actor,
    pub phase: SessionPhase,
    pub content: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    UnknownSession(SessionId),
    #[error("storage error: {0}")]
    StorageError(String),
    #[error("corrupt record {path}: {detail}")]
    CorruptRecord { path: PathBuf, detail: String },
}

fn storage(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |e| StoreError::StorageError(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionRecordOut<'a> {
    schema_version: u32,
    session: &'a Session,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct VersionProbe {
    schema_version: Option<u32>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionRecordIn {
    session: Session,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EntryRecord {
    schema_version: u32,
    #[serde(flatten)]
    entry: TranscriptEntry,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let sessions = root.join(SESSIONS_DIR);
        fs::create_dir_all(&sessions).map_err(storage(&sessions))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &SessionId) -> PathBuf {
        self.root.join(SESSIONS_DIR).join(id.as_str())
    }

    pub fn transcript_path(&self, id: &SessionId) -> PathBuf {
        self.session_dir(id).join(TRANSCRIPT_FILE)
    }

    pub fn exists(&self, id: &SessionId) -> bool {
        valid_id(id) && self.session_dir(id).join(SESSION_FILE).is_file()
    }

    fn require(&self, id: &SessionId) -> Result<PathBuf, StoreError> {
        if self.exists(id) {
            Ok(self.session_dir(id))
        } else {
            Err(StoreError::UnknownSession(id.clone()))
        }
    }

    /// Reserves the next sequential id by creating its directory.
    pub fn allocate_id(&self) -> Result<SessionId, StoreError> {
        let mut next = self
            .list()?
            .iter()
            .filter_map(|id| id.as_str().strip_prefix(ID_PREFIX)?.parse::<u32>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        loop {
            let id = SessionId::new(format!("{ID_PREFIX}{next:04}"));
            let dir = self.session_dir(&id);
            match fs::create_dir(&dir) {
                Ok(()) => return Ok(id),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => next += 1,
                Err(e) => return Err(storage(&dir)(e)),
            }
        }
    }

    /// Ids of all sessions with a directory, sorted.
    pub fn list(&self) -> Result<Vec<SessionId>, StoreError> {
        let dir = self.root.join(SESSIONS_DIR);
        let mut ids: Vec<SessionId> = fs::read_dir(&dir)
            .map_err(storage(&dir))?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .map(|e| SessionId::new(e.file_name().to_string_lossy()))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Atomically replaces the session document.
    pub fn save_session(&self, session: &Session) -> Result<(), StoreError> {
        if !valid_id(&session.id) {
            return Err(StoreError::StorageError(format!("invalid session id `{}`", session.id)));
        }
        let dir = self.session_dir(&session.id);
        fs::create_dir_all(&dir).map_err(storage(&dir))?;
        let record = SessionRecordOut {
            schema_version: SCHEMA_VERSION,
            session,
        };
        let mut bytes = serde_json::to_vec_pretty(&record)
            .map_err(|e| StoreError::StorageError(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(&dir.join(SESSION_FILE), &bytes)
    }

    pub fn load_session(&self, id: &SessionId) -> Result<Session, StoreError> {
        let path = self.require(id)?.join(SESSION_FILE);
        let text = fs::read_to_string(&path).map_err(storage(&path))?;
        let corrupt = |detail: String| StoreError::CorruptRecord {
            path: path.clone(),
            detail,
        };
        let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        match probe.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(corrupt(format!("unsupported schema version {v}"))),
            None => return Err(corrupt("missing schema version".into())),
        }
        let record: SessionRecordIn = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        Ok(record.session)
    }

    /// Durably appends entries to the session transcript, one line each.
    pub fn append(&self, id: &SessionId, entries: &[TranscriptEntry]) -> Result<(), StoreError> {
        let path = self.require(id)?.join(TRANSCRIPT_FILE);
        if entries.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(storage(&path))?;
        for entry in entries {
            let mut line = serde_json::to_vec(&EntryRecord {
                schema_version: SCHEMA_VERSION,
                entry: entry.clone(),
            })
            .map_err(|e| StoreError::StorageError(e.to_string()))?;
            line.push(b'\n');
            // One write per record so a crash cannot interleave two records.
            file.write_all(&line).map_err(storage(&path))?;
        }
        file.sync_data().map_err(storage(&path))
    }

    /// Transcript entries ordered by timestamp, ties in insertion order. A
    /// torn final line left by an interrupted append is ignored.
    pub fn entries(&self, id: &SessionId) -> Result<Vec<TranscriptEntry>, StoreError> {
        let path = self.require(id)?.join(TRANSCRIPT_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(storage(&path)(e)),
        };
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut entries = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let torn_tail = !complete && i + 1 == lines.len();
            match serde_json::from_str::<EntryRecord>(line) {
                Ok(record) if record.schema_version == SCHEMA_VERSION => entries.push(record.entry),
                Ok(record) => {
                    return Err(StoreError::CorruptRecord {
                        path,
                        detail: format!(
                            "line {}: unsupported schema version {}",
                            i + 1,
                            record.schema_version
                        ),
                    });
                }
                Err(_) if torn_tail => {}
                Err(e) => {
                    return Err(StoreError::CorruptRecord {
                        path,
                        detail: format!("line {}: {e}", i + 1),
                    });
                }
            }
        }
        entries.sort_by_key(|e| e.at);
        Ok(entries)
    }

    /// Human-readable transcript: a header naming the backend and objective,
    /// then one speaker-labelled block per entry.
    pub fn export_transcript(&self, id: &SessionId) -> Result<String, StoreError> {
        let session = self.load_session(id)?;
        let entries = self.entries(id)?;
        Ok(render_transcript(&session, &entries))
    }

    pub fn set_replay_ref(&self, id: &SessionId, reference: &str) -> Result<(), StoreError> {
        let path = self.require(id)?.join(REPLAY_REF_FILE);
        write_atomic(&path, format!("{reference}\n").as_bytes())
    }

    pub fn replay_ref(&self, id: &SessionId) -> Result<Option<String>, StoreError> {
        let path = self.require(id)?.join(REPLAY_REF_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text.trim().to_owned())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(storage(&path)(e)),
        }
    }

    pub fn set_current(&self, id: &SessionId) -> Result<(), StoreError> {
        self.require(id)?;
        write_atomic(&self.root.join(CURRENT_FILE), format!("{id}\n").as_bytes())
    }

    pub fn current(&self) -> Result<Option<SessionId>, StoreError> {
        let path = self.root.join(CURRENT_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(SessionId::new(text.trim()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(storage(&path)(e)),
        }
    }
}

pub fn render_transcript(session: &Session, entries: &[TranscriptEntry]) -> String {
    let objective = session
        .scenario
        .as_ref()
        .map_or("(no scenario)", |s| s.objective.as_str());
    let mut out = String::new();
    writeln!(out, "Session: {}", session.id).unwrap();
    writeln!(out, "Backend: {}", session.backend.name).unwrap();
    writeln!(out, "Objective: {objective}").unwrap();
    out.push('\n');
    for entry in entries {
        writeln!(out, "{}:", entry.actor.label()).unwrap();
        out.push_str(&entry.content);
        if !entry.content.ends_with('\n') {
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

fn valid_id(id: &SessionId) -> bool {
    let s = id.as_str();
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let unique = COUNTER.fetch_add(1, Ordering::Relaxed);
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.{unique}.tmp", std::process::id()));
    let mut file = File::create(&tmp).map_err(storage(&tmp))?;
    file.write_all(bytes).map_err(storage(&tmp))?;
    file.sync_all().map_err(storage(&tmp))?;
    fs::rename(&tmp, path).map_err(storage(path))
}
