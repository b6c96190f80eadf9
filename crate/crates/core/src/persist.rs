//! Model documents, append-only session logs and replay.
//!
//! A model document (`.psm.json`) is the canonical JSON of a
//! [`ProblemModel`] plus a trailing LF. A session log (`.psm.log`) holds one
//! canonical event per LF-terminated line; line `n` carries `seq = n`.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::canonical;
use crate::model::{validate, Id, ProblemModel, Violation};
use crate::session::{Digest, Event, RevisionPolicy, Session, SessionError, SessionSnapshot};

pub const MODEL_EXTENSION: &str = ".psm.json";
pub const LOG_EXTENSION: &str = ".psm.log";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PersistError {
    #[error("not valid JSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema mismatch at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("model is invalid ({} violations)", violations.len())]
    Validation { violations: Vec<Violation> },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("log rejected at seq {seq}: {reason}")]
    Chain { seq: u64, reason: String },
    #[error("replay failed at seq {seq}: {source}")]
    Replay { seq: u64, source: SessionError },
}

impl PersistError {
    pub fn code(&self) -> &'static str {
        match self {
            PersistError::Parse { .. } => "PARSE_ERROR",
            PersistError::Schema { .. } => "SCHEMA_ERROR",
            PersistError::Validation { .. } => "VALIDATION_ERROR",
            PersistError::Io { .. } => "IO_ERROR",
            PersistError::Chain { .. } => "CHAIN",
            PersistError::Replay { .. } => "REPLAY",
        }
    }
}

fn io_error(path: &Path, err: std::io::Error) -> PersistError {
    PersistError::Io { path: path.display().to_string(), message: err.to_string() }
}

/// Canonical text of a model (no trailing newline).
pub fn serialize_model(model: &ProblemModel) -> String {
    canonical::to_string(model).expect("models serialize")
}

/// Parses, schema-checks and validates a model document. Unknown fields are
/// rejected by name.
pub fn deserialize_model(text: &str) -> Result<ProblemModel, PersistError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| PersistError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let model: ProblemModel = serde_path_to_error::deserialize(value).map_err(|e| PersistError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let violations = validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(PersistError::Validation { violations })
    }
}

pub fn snapshot_to_string(snapshot: &SessionSnapshot) -> String {
    canonical::to_string(snapshot).expect("snapshots serialize")
}

/// Writes a model document via a sibling temp file and rename.
pub fn write_model(path: &Path, model: &ProblemModel) -> Result<(), PersistError> {
    let mut text = serialize_model(model);
    text.push('\n');
    write_atomically(path, text.as_bytes())
}

pub fn read_model(path: &Path) -> Result<ProblemModel, PersistError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    deserialize_model(&text)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    let mut tmp = PathBuf::from(path);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

/// Outcome of checking a log's bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase", tag = "status", rename_all_fields = "camelCase")]
pub enum LogVerdict {
    #[serde(rename = "OK")]
    Ok { count: u64, head: Digest },
    #[serde(rename = "BAD")]
    Bad { seq: u64, reason: String },
}

/// Parses and chain-checks log bytes. Every line must be the canonical form
/// of its event; the first failing line is reported by its seq (= line number).
pub fn parse_log(bytes: &[u8]) -> Result<Vec<Event>, PersistError> {
    let mut events = Vec::new();
    if bytes.is_empty() {
        return Ok(events);
    }
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    let complete = lines.last().is_some_and(|l| l.is_empty());
    if complete {
        lines.pop();
    }
    let mut head = Digest::ZERO;
    for (i, line) in lines.iter().enumerate() {
        let seq = i as u64 + 1;
        let bad = |reason: String| PersistError::Chain { seq, reason };
        if !complete && i + 1 == lines.len() {
            return Err(bad("final line is not newline-terminated".into()));
        }
        let text = std::str::from_utf8(line).map_err(|e| bad(format!("not UTF-8: {e}")))?;
        let event: Event = serde_json::from_str(text).map_err(|e| bad(format!("unparsable event: {e}")))?;
        if event.to_canonical() != text {
            return Err(bad("line is not in canonical form".into()));
        }
        if event.seq != seq {
            return Err(bad(format!("line {seq} carries seq {}", event.seq)));
        }
        if event.prev_hash != head {
            return Err(bad("prevHash does not match the previous hash".into()));
        }
        if event.hash != event.compute_hash() {
            return Err(bad("hash does not match content".into()));
        }
        head = event.hash;
        events.push(event);
    }
    Ok(events)
}

pub fn verify_bytes(bytes: &[u8]) -> LogVerdict {
    match parse_log(bytes) {
        Ok(events) => LogVerdict::Ok {
            count: events.len() as u64,
            head: events.last().map_or(Digest::ZERO, |e| e.hash),
        },
        Err(PersistError::Chain { seq, reason }) => LogVerdict::Bad { seq, reason },
        Err(other) => LogVerdict::Bad { seq: 0, reason: other.to_string() },
    }
}

pub fn verify_log(path: &Path) -> Result<LogVerdict, PersistError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(verify_bytes(&bytes))
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, PersistError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    parse_log(&bytes)
}

/// Appends one event after checking that it extends the file's last line.
pub fn append_event(path: &Path, event: &Event) -> Result<(), PersistError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_error(path, e)),
    };
    let (last_seq, last_hash) = last_link(&bytes)?;
    let bad = |reason: &str| PersistError::Chain { seq: event.seq, reason: reason.into() };
    if event.seq != last_seq + 1 {
        return Err(bad("seq does not follow the log head"));
    }
    if event.prev_hash != last_hash {
        return Err(bad("prevHash does not match the log head"));
    }
    if event.hash != event.compute_hash() {
        return Err(bad("hash does not match content"));
    }
    append_line(path, event)
}

/// Appends without reading the file; the caller vouches for the chain.
pub fn append_line(path: &Path, event: &Event) -> Result<(), PersistError> {
    let mut line = event.to_canonical();
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_error(path, e))?;
    file.write_all(line.as_bytes()).map_err(|e| io_error(path, e))?;
    file.sync_data().map_err(|e| io_error(path, e))
}

fn last_link(bytes: &[u8]) -> Result<(u64, Digest), PersistError> {
    if bytes.is_empty() {
        return Ok((0, Digest::ZERO));
    }
    let Some(body) = bytes.strip_suffix(b"\n") else {
        return Err(PersistError::Chain { seq: 0, reason: "log does not end with a newline".into() });
    };
    let last = body.rsplit(|&b| b == b'\n').next().unwrap_or(body);
    let event: Event = serde_json::from_slice(last)
        .map_err(|e| PersistError::Chain { seq: 0, reason: format!("last line is unparsable: {e}") })?;
    Ok((event.seq, event.hash))
}

/// Session id implied by a log file name (`abc.psm.log` gives `abc`).
pub fn session_id_for(path: &Path) -> Result<Id, PersistError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(LOG_EXTENSION)
        .or_else(|| name.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(&name);
    Id::new(stem).map_err(|e| PersistError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Rebuilds a session by applying each event in order.
pub fn replay_events(id: Id, policy: RevisionPolicy, events: &[Event]) -> Result<Session, PersistError> {
    let mut session = Session::new(id, policy);
    for event in events {
        session
            .apply_mut(event)
            .map_err(|source| PersistError::Replay { seq: event.seq, source })?;
    }
    Ok(session)
}

pub fn replay(path: &Path, policy: RevisionPolicy) -> Result<Session, PersistError> {
    let events = read_log(path)?;
    replay_events(session_id_for(path)?, policy, &events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::session::{EventBody, StakeholderRegistered};

    fn sample() -> ProblemModel {
        let m = ProblemModel::new(Id::new("m").unwrap(), "Sample");
        let m = subdivide_obstacle(&m, &Id::root(), &[Part::new("a", 0.25), Part::new("b", 0.75)]).unwrap();
        mark_leaf(&m, &Id::new("o1").unwrap()).unwrap()
    }

    #[test]
    fn model_round_trip_is_canonical() {
        let m = sample();
        let text = serialize_model(&m);
        assert_eq!(deserialize_model(&text).unwrap(), m);
        assert_eq!(serialize_model(&deserialize_model(&text).unwrap()), text);
    }

    #[test]
    fn unknown_field_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&serialize_model(&sample())).unwrap();
        v["obstacles"][0]["colour"] = "red".into();
        match deserialize_model(&v.to_string()) {
            Err(PersistError::Schema { path, message }) => {
                assert_eq!(path, "obstacles[0].colour");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match deserialize_model("{\n  \"id\": ") {
            Err(PersistError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_model_lists_violations() {
        let mut m = sample();
        m.obstacles[0].parents[0].weight = 0.5;
        let err = deserialize_model(&serialize_model(&m)).unwrap_err();
        assert_eq!(err.code(), "VALIDATION_ERROR");
    }

    fn chain(n: usize) -> Vec<Event> {
        let mut s = Session::new(Id::new("s").unwrap(), RevisionPolicy::default());
        let mut out = Vec::new();
        for i in 0..n {
            let body = EventBody::StakeholderRegistered(StakeholderRegistered {
                id: Id::new(format!("p{i}")).unwrap(),
                name: format!("P{i}"),
                constituency: String::new(),
            });
            let (next, event, _) = s.submit("fac", i as i64, &body).unwrap();
            s = next;
            out.push(event);
        }
        out
    }

    fn log_bytes(events: &[Event]) -> Vec<u8> {
        events.iter().flat_map(|e| format!("{}\n", e.to_canonical()).into_bytes()).collect()
    }

    #[test]
    fn verify_accepts_and_rejects() {
        let events = chain(3);
        let bytes = log_bytes(&events);
        assert_eq!(verify_bytes(&bytes), LogVerdict::Ok { count: 3, head: events[2].hash });
        assert_eq!(verify_bytes(b""), LogVerdict::Ok { count: 0, head: Digest::ZERO });

        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(verify_bytes(truncated), LogVerdict::Bad { seq: 3, .. }));

        let mut swapped = log_bytes(&[events[1].clone(), events[0].clone()]);
        swapped.extend(format!("{}\n", events[2].to_canonical()).into_bytes());
        assert!(matches!(verify_bytes(&swapped), LogVerdict::Bad { seq: 1, .. }));
    }

    #[test]
    fn append_checks_head_and_replay_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.psm.log");
        let events = chain(3);
        for e in &events {
            append_event(&path, e).unwrap();
        }
        assert_eq!(append_event(&path, &events[1]).unwrap_err().code(), "CHAIN");
        let session = replay(&path, RevisionPolicy::default()).unwrap();
        assert_eq!(session.head_hash(), events[2].hash);
        assert_eq!(session.model().stakeholders.len(), 3);
        assert_eq!(session.id().as_str(), "s");
    }
}
