//! File-backed persistence: one directory per student holding the
//! append-only event log, the latest snapshot, the API session and the
//! idempotency records.
//!
//! ```text
//! <data_dir>/students/<student_id>/
//!     session.json        bearer token and expiry
//!     events.jsonl        one SessionEvent per line, authoritative
//!     snapshot.json       Journey after the last committed event
//!     idempotency.jsonl   one StoredResponse per line
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tutorloop_core::orchestrator::{Journey, SessionEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub token: String,
    pub student_id: String,
    pub expires_at: DateTime<Utc>,
}

/// A response remembered under an idempotency key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub key: String,
    pub request_hash: String,
    pub status: u16,
    pub body: serde_json::Value,
}

/// Everything persisted for one student.
#[derive(Debug, Clone)]
pub struct StoredStudent {
    pub session: ApiSession,
    pub events: Vec<SessionEvent>,
    pub snapshot: Option<Journey>,
    pub idempotency: Vec<StoredResponse>,
}

/// The storage boundary. A database-backed implementation only needs these
/// five operations.
pub trait JourneyStore: Send + Sync {
    fn create_student(&self, session: &ApiSession) -> io::Result<()>;
    fn append_events(&self, student_id: &str, events: &[SessionEvent]) -> io::Result<()>;
    fn write_snapshot(&self, journey: &Journey) -> io::Result<()>;
    fn record_response(&self, student_id: &str, response: &StoredResponse) -> io::Result<()>;
    fn load_all(&self) -> io::Result<Vec<StoredStudent>>;
}

pub struct FileStore {
    root: PathBuf,
}

/// Student ids double as directory names.
pub fn valid_student_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn invalid_data(path: &Path, line: usize, e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {e}", path.display()))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| invalid_data(path, idx + 1, e))?);
    }
    Ok(out)
}

fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(&buf)?;
    file.sync_data()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(tmp, path)
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("students"))?;
        Ok(Self { root })
    }

    fn dir(&self, student_id: &str) -> io::Result<PathBuf> {
        if !valid_student_id(student_id) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "bad student id"));
        }
        Ok(self.root.join("students").join(student_id))
    }
}

impl JourneyStore for FileStore {
    fn create_student(&self, session: &ApiSession) -> io::Result<()> {
        let dir = self.dir(&session.student_id)?;
        fs::create_dir(&dir)?;
        write_atomic(&dir.join("session.json"), &serde_json::to_vec_pretty(session)?)
    }

    fn append_events(&self, student_id: &str, events: &[SessionEvent]) -> io::Result<()> {
        append_jsonl(&self.dir(student_id)?.join("events.jsonl"), events)
    }

    fn write_snapshot(&self, journey: &Journey) -> io::Result<()> {
        let path = self.dir(&journey.student_id)?.join("snapshot.json");
        write_atomic(&path, &serde_json::to_vec(journey)?)
    }

    fn record_response(&self, student_id: &str, response: &StoredResponse) -> io::Result<()> {
        append_jsonl(
            &self.dir(student_id)?.join("idempotency.jsonl"),
            std::slice::from_ref(response),
        )
    }

    fn load_all(&self) -> io::Result<Vec<StoredStudent>> {
        let mut out = Vec::new();
        let mut dirs: Vec<PathBuf> = fs::read_dir(self.root.join("students"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let session_path = dir.join("session.json");
            let session: ApiSession =
                serde_json::from_slice(&fs::read(&session_path)?).map_err(|e| invalid_data(&session_path, 1, e))?;
            let snapshot_path = dir.join("snapshot.json");
            let snapshot = match fs::read(&snapshot_path) {
                Ok(bytes) => serde_json::from_slice(&bytes).ok(),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(e),
            };
            out.push(StoredStudent {
                session,
                events: read_jsonl(&dir.join("events.jsonl"))?,
                snapshot,
                idempotency: read_jsonl(&dir.join("idempotency.jsonl"))?,
            });
        }
        Ok(out)
    }
}
