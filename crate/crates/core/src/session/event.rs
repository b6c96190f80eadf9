use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest as _, Sha256};

use super::{Phase, SessionError};
use crate::applicability::{CongruenceRecord, ParasiticEdge};
use crate::canonical;
use crate::model::{Id, Metric, ParentLink, ResourceKind};

/// SHA-256 digest, serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl std::str::FromStr for Digest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(format!("expected 64 lowercase hex digits, got `{s}`"));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|e| e.to_string())?;
        Ok(Digest(out))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    StakeholderRegistered,
    GoalDrafted,
    GoalEdited,
    GoalAgreed,
    PhaseAdvanced,
    ObstacleAdded,
    ObstacleSubdivided,
    WeightsSet,
    LeafMarked,
    SolutionAdded,
    ResourceRegistered,
    ResourceAssigned,
    ProgressReported,
    SpendReported,
    DependencyDeclared,
    CongruenceRecorded,
    MinorRevisionOpened,
    MajorRevisionOpened,
}

impl EventKind {
    pub const ALL: [EventKind; 18] = [
        EventKind::StakeholderRegistered,
        EventKind::GoalDrafted,
        EventKind::GoalEdited,
        EventKind::GoalAgreed,
        EventKind::PhaseAdvanced,
        EventKind::ObstacleAdded,
        EventKind::ObstacleSubdivided,
        EventKind::WeightsSet,
        EventKind::LeafMarked,
        EventKind::SolutionAdded,
        EventKind::ResourceRegistered,
        EventKind::ResourceAssigned,
        EventKind::ProgressReported,
        EventKind::SpendReported,
        EventKind::DependencyDeclared,
        EventKind::CongruenceRecorded,
        EventKind::MinorRevisionOpened,
        EventKind::MajorRevisionOpened,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::StakeholderRegistered => "STAKEHOLDER_REGISTERED",
            EventKind::GoalDrafted => "GOAL_DRAFTED",
            EventKind::GoalEdited => "GOAL_EDITED",
            EventKind::GoalAgreed => "GOAL_AGREED",
            EventKind::PhaseAdvanced => "PHASE_ADVANCED",
            EventKind::ObstacleAdded => "OBSTACLE_ADDED",
            EventKind::ObstacleSubdivided => "OBSTACLE_SUBDIVIDED",
            EventKind::WeightsSet => "WEIGHTS_SET",
            EventKind::LeafMarked => "LEAF_MARKED",
            EventKind::SolutionAdded => "SOLUTION_ADDED",
            EventKind::ResourceRegistered => "RESOURCE_REGISTERED",
            EventKind::ResourceAssigned => "RESOURCE_ASSIGNED",
            EventKind::ProgressReported => "PROGRESS_REPORTED",
            EventKind::SpendReported => "SPEND_REPORTED",
            EventKind::DependencyDeclared => "DEPENDENCY_DECLARED",
            EventKind::CongruenceRecorded => "CONGRUENCE_RECORDED",
            EventKind::MinorRevisionOpened => "MINOR_REVISION_OPENED",
            EventKind::MajorRevisionOpened => "MAJOR_REVISION_OPENED",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StakeholderRegistered {
    pub id: Id,
    pub name: String,
    #[serde(default)]
    pub constituency: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GoalPayload {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_state_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_count_override: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GoalAgreed {
    pub roster: Vec<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PhaseAdvanced {
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObstacleAdded {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub label: String,
    pub parents: Vec<ParentLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PartPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObstacleSubdivided {
    pub obstacle_id: Id,
    pub parts: Vec<PartPayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ChildWeight {
    pub child: Id,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WeightsSet {
    pub parent: Id,
    pub weights: Vec<ChildWeight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LeafMarked {
    pub obstacle_id: Id,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolutionAdded {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub leaf_id: Id,
    pub label: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceRegistered {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub name: String,
    pub kind: ResourceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceAssigned {
    pub resource_id: Id,
    pub solution_id: Id,
    pub share: f64,
    #[serde(default)]
    pub spend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProgressReported {
    pub solution_id: Id,
    pub progress: f64,
    #[serde(default)]
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpendReported {
    pub resource_id: Id,
    pub solution_id: Id,
    pub spend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RevisionOpened {
    pub target_phase: Phase,
}

/// Typed view of an event's kind and payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventBody {
    StakeholderRegistered(StakeholderRegistered),
    GoalDrafted(GoalPayload),
    GoalEdited(GoalPayload),
    GoalAgreed(GoalAgreed),
    PhaseAdvanced(PhaseAdvanced),
    ObstacleAdded(ObstacleAdded),
    ObstacleSubdivided(ObstacleSubdivided),
    WeightsSet(WeightsSet),
    LeafMarked(LeafMarked),
    SolutionAdded(SolutionAdded),
    ResourceRegistered(ResourceRegistered),
    ResourceAssigned(ResourceAssigned),
    ProgressReported(ProgressReported),
    SpendReported(SpendReported),
    DependencyDeclared(ParasiticEdge),
    CongruenceRecorded(CongruenceRecord),
    MinorRevisionOpened(RevisionOpened),
    MajorRevisionOpened(RevisionOpened),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::StakeholderRegistered(_) => EventKind::StakeholderRegistered,
            EventBody::GoalDrafted(_) => EventKind::GoalDrafted,
            EventBody::GoalEdited(_) => EventKind::GoalEdited,
            EventBody::GoalAgreed(_) => EventKind::GoalAgreed,
            EventBody::PhaseAdvanced(_) => EventKind::PhaseAdvanced,
            EventBody::ObstacleAdded(_) => EventKind::ObstacleAdded,
            EventBody::ObstacleSubdivided(_) => EventKind::ObstacleSubdivided,
            EventBody::WeightsSet(_) => EventKind::WeightsSet,
            EventBody::LeafMarked(_) => EventKind::LeafMarked,
            EventBody::SolutionAdded(_) => EventKind::SolutionAdded,
            EventBody::ResourceRegistered(_) => EventKind::ResourceRegistered,
            EventBody::ResourceAssigned(_) => EventKind::ResourceAssigned,
            EventBody::ProgressReported(_) => EventKind::ProgressReported,
            EventBody::SpendReported(_) => EventKind::SpendReported,
            EventBody::DependencyDeclared(_) => EventKind::DependencyDeclared,
            EventBody::CongruenceRecorded(_) => EventKind::CongruenceRecorded,
            EventBody::MinorRevisionOpened(_) => EventKind::MinorRevisionOpened,
            EventBody::MajorRevisionOpened(_) => EventKind::MajorRevisionOpened,
        }
    }

    /// Decodes a raw payload for `kind`, reporting the failing field path.
    pub fn decode(kind: EventKind, payload: &Value) -> Result<Self, SessionError> {
        let tagged = json!({ "kind": kind, "payload": payload });
        serde_path_to_error::deserialize(tagged).map_err(|err| SessionError::Payload {
            kind,
            path: err.path().to_string(),
            message: err.inner().to_string(),
        })
    }

    /// The payload as a JSON tree, in its normalized form.
    pub fn payload(&self) -> Value {
        let mut tagged = serde_json::to_value(self).expect("event bodies serialize");
        tagged
            .get_mut("payload")
            .map(Value::take)
            .expect("adjacently tagged body has a payload")
    }
}

/// One entry of the hash-chained session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Event {
    pub seq: u64,
    /// Milliseconds since the Unix epoch, UTC. Informational only.
    pub timestamp: i64,
    pub actor: String,
    pub kind: EventKind,
    pub payload: Value,
    pub prev_hash: Digest,
    pub hash: Digest,
}

impl Event {
    /// Builds a chained event; the payload is normalized through `body`.
    pub fn seal(seq: u64, timestamp: i64, actor: impl Into<String>, body: &EventBody, prev_hash: Digest) -> Event {
        let mut event = Event {
            seq,
            timestamp,
            actor: actor.into(),
            kind: body.kind(),
            payload: body.payload(),
            prev_hash,
            hash: Digest::ZERO,
        };
        event.hash = event.compute_hash();
        event
    }

    /// Digest over the canonical bytes of every field except `hash`.
    pub fn compute_hash(&self) -> Digest {
        let mut out = String::with_capacity(256);
        self.write_fields(&mut out, false);
        Digest::of(out.as_bytes())
    }

    /// Writes the canonical object, keys in sorted order, with or without
    /// the `hash` member.
    fn write_fields(&self, out: &mut String, with_hash: bool) {
        out.push_str("{\"actor\":");
        canonical::write_str(&self.actor, out);
        if with_hash {
            out.push_str(",\"hash\":\"");
            out.push_str(&self.hash.to_hex());
            out.push('"');
        }
        out.push_str(",\"kind\":\"");
        out.push_str(self.kind.as_str());
        out.push_str("\",\"payload\":");
        canonical::write_value(&self.payload, out);
        out.push_str(",\"prevHash\":\"");
        out.push_str(&self.prev_hash.to_hex());
        let _ = write!(out, "\",\"seq\":{},\"timestamp\":{}}}", self.seq, self.timestamp);
    }

    pub fn body(&self) -> Result<EventBody, SessionError> {
        EventBody::decode(self.kind, &self.payload)
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::with_capacity(320);
        self.write_fields(&mut out, true);
        out
    }
}
