//! Live sessions backed by `.psm.log` files in a data directory.
//!
//! Each session has one writer at a time. Readers take the current
//! `Arc<Session>` and never wait for a write to finish.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use psm_core::model::Id;
use psm_core::persist::{append_line, replay, LOG_EXTENSION};
use psm_core::session::{Event, EventKind, PolicyWarning, RevisionPolicy, Session};
use serde_json::Value;
use tokio::sync::broadcast;

use crate::error::ApiError;

const STREAM_BUFFER: usize = 1024;

pub struct LiveSession {
    path: PathBuf,
    current: RwLock<Arc<Session>>,
    writer: tokio::sync::Mutex<()>,
    events: broadcast::Sender<Arc<Event>>,
}

impl LiveSession {
    fn new(path: PathBuf, session: Session) -> Self {
        let (events, _) = broadcast::channel(STREAM_BUFFER);
        LiveSession { path, current: RwLock::new(Arc::new(session)), writer: tokio::sync::Mutex::new(()), events }
    }

    pub fn current(&self) -> Arc<Session> {
        self.current.read().expect("session lock poisoned").clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<Event>> {
        self.events.subscribe()
    }

    /// Seals, persists and publishes one event. The log line is on disk
    /// before any reader can see the new state.
    pub async fn submit(
        &self,
        actor: &str,
        kind: EventKind,
        payload: &Value,
    ) -> Result<(Arc<Event>, Vec<PolicyWarning>), ApiError> {
        let _guard = self.writer.lock().await;
        let mut next = (*self.current()).clone();
        let last = next.log().last().map_or(i64::MIN, |e| e.timestamp);
        let timestamp = now_ms().max(last);
        let (event, warnings) = next.submit_raw_mut(actor, timestamp, kind, payload)?;
        append_line(&self.path, &event)?;
        let event = Arc::new(event);
        *self.current.write().expect("session lock poisoned") = Arc::new(next);
        // Nobody listening is fine.
        let _ = self.events.send(event.clone());
        Ok((event, warnings))
    }
}

pub fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

pub struct Store {
    dir: PathBuf,
    policy: RevisionPolicy,
    sessions: Mutex<HashMap<String, Arc<LiveSession>>>,
}

impl Store {
    pub fn new(dir: impl Into<PathBuf>, policy: RevisionPolicy) -> Result<Self, ApiError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| ApiError::internal("IO_ERROR", format!("{}: {e}", dir.display())))?;
        Ok(Store { dir, policy, sessions: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &Id) -> PathBuf {
        self.dir.join(format!("{id}{LOG_EXTENSION}"))
    }

    fn parse_id(raw: &str) -> Result<Id, ApiError> {
        Id::new(raw).map_err(|e| ApiError::new(400, "INVALID_ID", e.to_string()))
    }

    /// Creates an empty log. Fails if the session already exists.
    pub fn create(&self, id: Option<&str>) -> Result<Arc<LiveSession>, ApiError> {
        let id = match id {
            Some(raw) => Self::parse_id(raw)?,
            None => Id::new(uuid::Uuid::new_v4().to_string()).expect("uuids are well-formed ids"),
        };
        let mut sessions = self.sessions.lock().expect("store lock poisoned");
        let path = self.log_path(&id);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(ApiError::new(409, "SESSION_EXISTS", format!("session `{id}` already exists")));
            }
            Err(e) => return Err(ApiError::internal("IO_ERROR", format!("{}: {e}", path.display()))),
        }
        let live = Arc::new(LiveSession::new(path, Session::new(id.clone(), self.policy)));
        sessions.insert(id.to_string(), live.clone());
        Ok(live)
    }

    /// Looks a session up, replaying its log on first use.
    pub fn get(&self, raw: &str) -> Result<Arc<LiveSession>, ApiError> {
        let id = Self::parse_id(raw)?;
        let mut sessions = self.sessions.lock().expect("store lock poisoned");
        if let Some(live) = sessions.get(id.as_str()) {
            return Ok(live.clone());
        }
        let path = self.log_path(&id);
        if !path.is_file() {
            return Err(ApiError::not_found(raw));
        }
        let session = replay(&path, self.policy)?;
        let live = Arc::new(LiveSession::new(path, session));
        sessions.insert(id.to_string(), live.clone());
        Ok(live)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[tokio::test]
    async fn events_reach_disk_and_survive_a_restart() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path(), RevisionPolicy::default()).unwrap();
        let live = store.create(Some("s1")).unwrap();
        let mut rx = live.subscribe();
        let (event, _) = live
            .submit("alice", EventKind::StakeholderRegistered, &json!({ "id": "p1", "name": "Alice" }))
            .await
            .unwrap();
        assert_eq!(event.seq, 1);
        assert_eq!(rx.recv().await.unwrap().seq, 1);

        let reopened = Store::new(dir.path(), RevisionPolicy::default()).unwrap();
        let again = reopened.get("s1").unwrap().current();
        assert_eq!(again.head_hash(), live.current().head_hash());
        assert_eq!(store.create(Some("s1")).err().unwrap().code, "SESSION_EXISTS");
    }

    #[tokio::test]
    async fn rejected_events_leave_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path(), RevisionPolicy::default()).unwrap();
        let live = store.create(None).unwrap();
        let err = live.submit("alice", EventKind::LeafMarked, &json!({ "obstacleId": "o1" })).await.unwrap_err();
        assert_eq!(err.code, "PHASE_COHERENCE");
        assert_eq!(live.current().head_seq(), 0);
        let id = live.current().id().clone();
        assert_eq!(std::fs::read(store.log_path(&id)).unwrap(), b"");
    }

    #[test]
    fn unknown_and_malformed_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path(), RevisionPolicy::default()).unwrap();
        assert_eq!(store.get("nobody").err().unwrap().http_status, 404);
        assert_eq!(store.get("../etc").err().unwrap().http_status, 400);
    }
}
