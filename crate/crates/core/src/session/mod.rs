//! Event-sourced facilitation sessions.
//!
//! A [`Session`] is the fold of its hash-chained log. Every event passes the
//! phase gate first, then the corresponding guarded model operation; a
//! rejected event leaves the session untouched.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::applicability::{self, CongruenceError, CongruenceRecord, NetworkError, ParasiticEdge};
use crate::model::{self, GoalStatus, GoalText, Id, ModelError, Part, ProblemModel, Stakeholder};

mod event;

pub use event::*;

pub const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Goal,
    Obstacles,
    Solutions,
    Resources,
    Implementation,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Goal,
        Phase::Obstacles,
        Phase::Solutions,
        Phase::Resources,
        Phase::Implementation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<Phase> {
        Phase::ALL.get(self.index() + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Goal => "GOAL",
            Phase::Obstacles => "OBSTACLES",
            Phase::Solutions => "SOLUTIONS",
            Phase::Resources => "RESOURCES",
            Phase::Implementation => "IMPLEMENTATION",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The fixed gate table: which event kinds each phase admits.
pub fn gate_check(phase: Phase, kind: EventKind) -> bool {
    use EventKind::*;
    match kind {
        StakeholderRegistered | GoalDrafted | GoalEdited | GoalAgreed => phase == Phase::Goal,
        CongruenceRecorded => matches!(phase, Phase::Goal | Phase::Implementation),
        ObstacleAdded | ObstacleSubdivided | WeightsSet | LeafMarked => phase == Phase::Obstacles,
        SolutionAdded => phase == Phase::Solutions,
        ResourceRegistered | ResourceAssigned => phase == Phase::Resources,
        ProgressReported | SpendReported | DependencyDeclared => phase == Phase::Implementation,
        PhaseAdvanced => phase.next().is_some(),
        MinorRevisionOpened | MajorRevisionOpened => phase == Phase::Implementation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RevisionScope {
    Minor,
    Major,
}

/// Minimum sensible intervals between structural revisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RevisionPolicy {
    pub t_minor_ms: i64,
    pub t_major_ms: i64,
}

impl Default for RevisionPolicy {
    fn default() -> Self {
        RevisionPolicy { t_minor_ms: 365 * DAY_MS, t_major_ms: 1095 * DAY_MS }
    }
}

impl RevisionPolicy {
    pub fn new(t_minor_ms: i64, t_major_ms: i64) -> Result<Self, SessionError> {
        if t_minor_ms <= 0 || t_minor_ms >= t_major_ms {
            return Err(SessionError::InvalidPolicy { t_minor_ms, t_major_ms });
        }
        Ok(RevisionPolicy { t_minor_ms, t_major_ms })
    }

    pub fn required_ms(&self, scope: RevisionScope) -> i64 {
        match scope {
            RevisionScope::Minor => self.t_minor_ms,
            RevisionScope::Major => self.t_major_ms,
        }
    }
}

/// Revision opened sooner than the policy recommends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyWarning {
    pub scope: RevisionScope,
    pub elapsed_ms: i64,
    pub required_ms: i64,
    pub message: String,
}

/// An item blocking a phase transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Unmet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<Id>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{kind} is not admitted during the {phase} phase")]
    PhaseCoherence { phase: Phase, kind: EventKind },
    #[error("chain break at seq {seq}: {reason}")]
    Chain { seq: u64, reason: String },
    #[error("{phase} phase is incomplete ({} unmet items)", unmet.len())]
    IncompletePhase { phase: Phase, unmet: Vec<Unmet> },
    #[error("phase advance names {requested}, but the next phase is {expected:?}")]
    PhaseMismatch { requested: Phase, expected: Option<Phase> },
    #[error("revisions open only during implementation (current phase {0})")]
    NotInImplementation(Phase),
    #[error("a minor revision cannot reopen the goal")]
    MinorCannotTargetGoal,
    #[error("a revision cannot target {0}")]
    InvalidRevisionTarget(Phase),
    #[error("malformed {kind} payload at `{path}`: {message}")]
    Payload { kind: EventKind, path: String, message: String },
    #[error("event actor is empty")]
    EmptyActor,
    #[error("revision policy needs 0 < tMinor < tMajor (got {t_minor_ms} / {t_major_ms} ms)")]
    InvalidPolicy { t_minor_ms: i64, t_major_ms: i64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl SessionError {
    /// Stable machine code; one per error kind.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::PhaseCoherence { .. } => "PHASE_COHERENCE",
            SessionError::Chain { .. } => "CHAIN",
            SessionError::IncompletePhase { .. } => "INCOMPLETE_PHASE",
            SessionError::PhaseMismatch { .. } => "PHASE_MISMATCH",
            SessionError::NotInImplementation(_) => "NOT_IN_IMPLEMENTATION",
            SessionError::MinorCannotTargetGoal => "MINOR_CANNOT_TARGET_GOAL",
            SessionError::InvalidRevisionTarget(_) => "INVALID_REVISION_TARGET",
            SessionError::Payload { .. } => "INVALID_PAYLOAD",
            SessionError::EmptyActor => "EMPTY_ACTOR",
            SessionError::InvalidPolicy { .. } => "INVALID_POLICY",
            SessionError::Model(e) => e.code(),
            SessionError::Congruence(e) => e.code(),
            SessionError::Network(e) => e.code(),
        }
    }
}

/// Everything about a session except its log, in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SessionSnapshot {
    pub id: Id,
    pub phase: Phase,
    pub model: ProblemModel,
    pub congruence: Vec<CongruenceRecord>,
    pub dependencies: Vec<ParasiticEdge>,
    pub started_at: Option<i64>,
    pub last_minor_revision: Option<i64>,
    pub last_major_revision: Option<i64>,
    pub policy: RevisionPolicy,
    pub head_seq: u64,
    pub head_hash: Digest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: Id,
    phase: Phase,
    model: ProblemModel,
    log: Vec<Event>,
    congruence: Vec<CongruenceRecord>,
    dependencies: Vec<ParasiticEdge>,
    started_at: Option<i64>,
    last_minor_revision: Option<i64>,
    last_major_revision: Option<i64>,
    policy: RevisionPolicy,
}

impl Session {
    pub fn new(id: Id, policy: RevisionPolicy) -> Self {
        Session {
            model: ProblemModel::new(id.clone(), ""),
            id,
            phase: Phase::Goal,
            log: Vec::new(),
            congruence: Vec::new(),
            dependencies: Vec::new(),
            started_at: None,
            last_minor_revision: None,
            last_major_revision: None,
            policy,
        }
    }

    pub fn id(&self) -> &Id {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn model(&self) -> &ProblemModel {
        &self.model
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn congruence(&self) -> &[CongruenceRecord] {
        &self.congruence
    }

    pub fn dependencies(&self) -> &[ParasiticEdge] {
        &self.dependencies
    }

    pub fn policy(&self) -> RevisionPolicy {
        self.policy
    }

    pub fn head_seq(&self) -> u64 {
        self.log.last().map_or(0, |e| e.seq)
    }

    pub fn head_hash(&self) -> Digest {
        self.log.last().map_or(Digest::ZERO, |e| e.hash)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            phase: self.phase,
            model: self.model.clone(),
            congruence: self.congruence.clone(),
            dependencies: self.dependencies.clone(),
            started_at: self.started_at,
            last_minor_revision: self.last_minor_revision,
            last_major_revision: self.last_major_revision,
            policy: self.policy,
            head_seq: self.head_seq(),
            head_hash: self.head_hash(),
        }
    }

    /// Chains `body` onto the current head without applying it.
    pub fn seal(&self, actor: &str, timestamp: i64, body: &EventBody) -> Event {
        Event::seal(self.head_seq() + 1, timestamp, actor, body, self.head_hash())
    }

    /// Applies one event, returning the successor session.
    pub fn apply(&self, event: &Event) -> Result<Session, SessionError> {
        let mut next = self.clone();
        next.apply_mut(event)?;
        Ok(next)
    }

    /// In-place variant of [`Session::apply`]; on error `self` is unchanged.
    pub fn apply_mut(&mut self, event: &Event) -> Result<(), SessionError> {
        self.check_link(event)?;
        if !gate_check(self.phase, event.kind) {
            return Err(SessionError::PhaseCoherence { phase: self.phase, kind: event.kind });
        }
        if event.actor.is_empty() {
            return Err(SessionError::EmptyActor);
        }
        let body = event.body()?;
        self.transition(&body, event.timestamp)?;
        if self.started_at.is_none() {
            self.started_at = Some(event.timestamp);
        }
        self.log.push(event.clone());
        Ok(())
    }

    fn check_link(&self, event: &Event) -> Result<(), SessionError> {
        let expected = self.head_seq() + 1;
        if event.seq != expected {
            return Err(SessionError::Chain {
                seq: event.seq,
                reason: format!("expected seq {expected}"),
            });
        }
        if event.prev_hash != self.head_hash() {
            return Err(SessionError::Chain {
                seq: event.seq,
                reason: format!("prevHash does not match head {}", self.head_hash()),
            });
        }
        if event.hash != event.compute_hash() {
            return Err(SessionError::Chain { seq: event.seq, reason: "hash does not match content".into() });
        }
        Ok(())
    }

    /// Seals and applies a body in one step, returning the event and any
    /// revision-timing warnings.
    pub fn submit(
        &self,
        actor: &str,
        timestamp: i64,
        body: &EventBody,
    ) -> Result<(Session, Event, Vec<PolicyWarning>), SessionError> {
        let mut next = self.clone();
        let (event, warnings) = next.submit_mut(actor, timestamp, body)?;
        Ok((next, event, warnings))
    }

    /// In-place variant of [`Session::submit`]; on error `self` is unchanged.
    pub fn submit_mut(
        &mut self,
        actor: &str,
        timestamp: i64,
        body: &EventBody,
    ) -> Result<(Event, Vec<PolicyWarning>), SessionError> {
        let warnings = match body {
            EventBody::MinorRevisionOpened(_) => self.revision_warnings(RevisionScope::Minor, timestamp),
            EventBody::MajorRevisionOpened(_) => self.revision_warnings(RevisionScope::Major, timestamp),
            _ => Vec::new(),
        };
        let event = self.seal(actor, timestamp, body);
        self.apply_mut(&event)?;
        Ok((event, warnings))
    }

    /// Like [`Session::submit`] but starting from a raw kind and payload.
    pub fn submit_raw(
        &self,
        actor: &str,
        timestamp: i64,
        kind: EventKind,
        payload: &Value,
    ) -> Result<(Session, Event, Vec<PolicyWarning>), SessionError> {
        let mut next = self.clone();
        let (event, warnings) = next.submit_raw_mut(actor, timestamp, kind, payload)?;
        Ok((next, event, warnings))
    }

    /// In-place variant of [`Session::submit_raw`]. The gate is consulted
    /// before the payload is decoded.
    pub fn submit_raw_mut(
        &mut self,
        actor: &str,
        timestamp: i64,
        kind: EventKind,
        payload: &Value,
    ) -> Result<(Event, Vec<PolicyWarning>), SessionError> {
        if !gate_check(self.phase, kind) {
            return Err(SessionError::PhaseCoherence { phase: self.phase, kind });
        }
        let body = EventBody::decode(kind, payload)?;
        self.submit_mut(actor, timestamp, &body)
    }

    /// Moves to the next phase once the current one is complete.
    pub fn advance_phase(&self, actor: &str, timestamp: i64) -> Result<Session, SessionError> {
        let to = self
            .phase
            .next()
            .ok_or(SessionError::PhaseCoherence { phase: self.phase, kind: EventKind::PhaseAdvanced })?;
        let (next, _, _) = self.submit(actor, timestamp, &EventBody::PhaseAdvanced(PhaseAdvanced { to }))?;
        Ok(next)
    }

    /// Re-enters an earlier phase from implementation. Opening a revision
    /// sooner than the policy interval is allowed but warned about.
    pub fn open_revision(
        &self,
        scope: RevisionScope,
        target: Phase,
        actor: &str,
        timestamp: i64,
    ) -> Result<(Session, Vec<PolicyWarning>), SessionError> {
        if self.phase != Phase::Implementation {
            return Err(SessionError::NotInImplementation(self.phase));
        }
        let payload = RevisionOpened { target_phase: target };
        let body = match scope {
            RevisionScope::Minor => EventBody::MinorRevisionOpened(payload),
            RevisionScope::Major => EventBody::MajorRevisionOpened(payload),
        };
        let (next, _, warnings) = self.submit(actor, timestamp, &body)?;
        Ok((next, warnings))
    }

    /// Warnings a revision of `scope` opened at `timestamp` would raise. The
    /// interval runs from the last revision of the same scope, or from the
    /// first event when there was none.
    pub fn revision_warnings(&self, scope: RevisionScope, timestamp: i64) -> Vec<PolicyWarning> {
        let last = match scope {
            RevisionScope::Minor => self.last_minor_revision,
            RevisionScope::Major => self.last_major_revision,
        };
        let Some(reference) = last.or(self.started_at) else {
            return Vec::new();
        };
        let elapsed_ms = timestamp - reference;
        let required_ms = self.policy.required_ms(scope);
        if elapsed_ms >= required_ms {
            return Vec::new();
        }
        vec![PolicyWarning {
            scope,
            elapsed_ms,
            required_ms,
            message: format!(
                "{} revision after {:.1} days; the policy interval is {:.1} days",
                match scope {
                    RevisionScope::Minor => "minor",
                    RevisionScope::Major => "major",
                },
                elapsed_ms as f64 / DAY_MS as f64,
                required_ms as f64 / DAY_MS as f64
            ),
        }]
    }

    /// Items that block leaving the current phase.
    pub fn unmet_for_advance(&self) -> Vec<Unmet> {
        let model = &self.model;
        match self.phase {
            Phase::Goal => {
                if model.goal.status == GoalStatus::Agreed {
                    Vec::new()
                } else {
                    vec![Unmet { id: None, reason: "goal has not been agreed by all stakeholders".into() }]
                }
            }
            Phase::Obstacles => {
                if model.obstacles.is_empty() {
                    return vec![Unmet { id: None, reason: "no obstacles identified".into() }];
                }
                let parents: BTreeSet<&str> = model
                    .obstacles
                    .iter()
                    .flat_map(|o| o.parents.iter().map(|l| l.parent.as_str()))
                    .collect();
                model
                    .obstacles
                    .iter()
                    .filter(|o| !o.is_leaf && !parents.contains(o.id.as_str()))
                    .map(|o| Unmet { id: Some(o.id.clone()), reason: "neither subdivided nor marked leaf".into() })
                    .collect()
            }
            Phase::Solutions => model
                .obstacles
                .iter()
                .filter(|o| o.is_leaf && model.solutions_of(o.id.as_str()).next().is_none())
                .map(|o| Unmet { id: Some(o.id.clone()), reason: "leaf has no solution".into() })
                .collect(),
            Phase::Resources | Phase::Implementation => Vec::new(),
        }
    }

    fn transition(&mut self, body: &EventBody, timestamp: i64) -> Result<(), SessionError> {
        let model = &self.model;
        let next_model = match body {
            EventBody::StakeholderRegistered(p) => model::register_stakeholder(
                model,
                Stakeholder { id: p.id.clone(), name: p.name.clone(), constituency: p.constituency.clone() },
            )?,
            EventBody::GoalDrafted(p) | EventBody::GoalEdited(p) => {
                let text = GoalText {
                    text: p.text.clone(),
                    current_state_description: p.current_state_description.clone(),
                    sentence_count_override: p.sentence_count_override,
                };
                let mut next = if matches!(body, EventBody::GoalDrafted(_)) {
                    model::draft_goal(model, text)?
                } else {
                    model::edit_goal(model, text)?
                };
                if let Some(title) = &p.title {
                    next.title = title.clone();
                }
                next
            }
            EventBody::GoalAgreed(p) => model::agree_goal(model, &p.roster)?,
            EventBody::PhaseAdvanced(p) => {
                let expected = self.phase.next();
                if Some(p.to) != expected {
                    return Err(SessionError::PhaseMismatch { requested: p.to, expected });
                }
                let unmet = self.unmet_for_advance();
                if !unmet.is_empty() {
                    return Err(SessionError::IncompletePhase { phase: self.phase, unmet });
                }
                self.phase = p.to;
                return Ok(());
            }
            EventBody::ObstacleAdded(p) => {
                let parents: Vec<(Id, f64)> = p.parents.iter().map(|l| (l.parent.clone(), l.weight)).collect();
                model::add_obstacle(model, p.id.clone(), p.label.clone(), &parents)?
            }
            EventBody::ObstacleSubdivided(p) => {
                let parts: Vec<Part> = p
                    .parts
                    .iter()
                    .map(|part| Part { id: part.id.clone(), label: part.label.clone(), weight: part.weight })
                    .collect();
                model::subdivide_obstacle(model, &p.obstacle_id, &parts)?
            }
            EventBody::WeightsSet(p) => {
                let weights: Vec<(Id, f64)> = p.weights.iter().map(|w| (w.child.clone(), w.weight)).collect();
                model::set_weights(model, &p.parent, &weights)?
            }
            EventBody::LeafMarked(p) => model::mark_leaf(model, &p.obstacle_id)?,
            EventBody::SolutionAdded(p) => {
                model::add_solution(model, p.id.clone(), &p.leaf_id, p.label.clone(), p.share)?
            }
            EventBody::ResourceRegistered(p) => model::register_resource(model, p.id.clone(), p.name.clone(), p.kind)?,
            EventBody::ResourceAssigned(p) => {
                model::assign_resource(model, &p.solution_id, &p.resource_id, p.share, p.spend)?
            }
            EventBody::ProgressReported(p) => model::report_progress(model, &p.solution_id, p.progress, &p.metrics)?,
            EventBody::SpendReported(p) => model::report_spend(model, &p.resource_id, &p.solution_id, p.spend)?,
            EventBody::DependencyDeclared(edge) => {
                applicability::check_declaration(model, edge)?;
                self.dependencies.push(edge.clone());
                return Ok(());
            }
            EventBody::CongruenceRecorded(record) => {
                record.check_against(model)?;
                match self.congruence.iter_mut().find(|r| r.stakeholder_id == record.stakeholder_id) {
                    Some(existing) => *existing = record.clone(),
                    None => self.congruence.push(record.clone()),
                }
                return Ok(());
            }
            EventBody::MinorRevisionOpened(p) => {
                match p.target_phase {
                    Phase::Goal => return Err(SessionError::MinorCannotTargetGoal),
                    Phase::Implementation => return Err(SessionError::InvalidRevisionTarget(p.target_phase)),
                    target => self.phase = target,
                }
                self.last_minor_revision = Some(timestamp);
                return Ok(());
            }
            EventBody::MajorRevisionOpened(p) => {
                if p.target_phase == Phase::Implementation {
                    return Err(SessionError::InvalidRevisionTarget(p.target_phase));
                }
                self.phase = p.target_phase;
                self.last_major_revision = Some(timestamp);
                return Ok(());
            }
        };
        self.model = next_model;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParentLink, GOAL_ROOT};
    use serde_json::json;

    fn id(s: &str) -> Id {
        Id::new(s).unwrap()
    }

    fn submit(s: &Session, kind: EventKind, payload: Value) -> Result<Session, SessionError> {
        let ts = s.head_seq() as i64 * 1000;
        s.submit_raw("facilitator", ts, kind, &payload).map(|(next, _, _)| next)
    }

    fn agreed_session(n: usize) -> Session {
        let mut s = Session::new(id("sess"), RevisionPolicy::default());
        let mut roster = Vec::new();
        for i in 0..n {
            let sid = format!("st{i}");
            s = submit(&s, EventKind::StakeholderRegistered, json!({"id": sid, "name": sid})).unwrap();
            roster.push(sid);
        }
        s = submit(&s, EventKind::GoalDrafted, json!({"text": "A draft goal."})).unwrap();
        submit(&s, EventKind::GoalAgreed, json!({"roster": roster})).unwrap()
    }

    #[test]
    fn gate_examples() {
        assert!(!gate_check(Phase::Goal, EventKind::ObstacleAdded));
        assert!(!gate_check(Phase::Solutions, EventKind::ResourceAssigned));
        assert!(gate_check(Phase::Obstacles, EventKind::ObstacleSubdivided));
        assert!(!gate_check(Phase::Implementation, EventKind::PhaseAdvanced));
        assert!(gate_check(Phase::Implementation, EventKind::MajorRevisionOpened));
    }

    #[test]
    fn obstacle_in_goal_phase_is_incoherent() {
        let s = Session::new(id("s"), RevisionPolicy::default());
        let err = submit(
            &s,
            EventKind::ObstacleAdded,
            json!({"label": "x", "parents": [{"parent": GOAL_ROOT, "weight": 1.0}]}),
        )
        .unwrap_err();
        assert_eq!(err, SessionError::PhaseCoherence { phase: Phase::Goal, kind: EventKind::ObstacleAdded });
        assert_eq!(err.code(), "PHASE_COHERENCE");
    }

    #[test]
    fn goal_edit_keeps_history() {
        let s = Session::new(id("s"), RevisionPolicy::default());
        let s = submit(&s, EventKind::GoalDrafted, json!({"text": "First try."})).unwrap();
        let s = submit(&s, EventKind::GoalEdited, json!({"text": "Second try."})).unwrap();
        assert_eq!(s.model().goal.text, "Second try.");
        assert_eq!(s.model().goal.status, GoalStatus::Draft);
        assert_eq!(s.log().len(), 2);
        assert_eq!(s.log()[0].payload["text"], "First try.");
    }

    #[test]
    fn chain_break_rejected() {
        let mut s = Session::new(id("s"), RevisionPolicy::default());
        for i in 0..4 {
            let sid = format!("p{i}");
            s = submit(&s, EventKind::StakeholderRegistered, json!({"id": sid, "name": sid})).unwrap();
        }
        let body = EventBody::decode(EventKind::StakeholderRegistered, &json!({"id": "late", "name": "late"})).unwrap();
        let forged = Event::seal(5, 0, "f", &body, Digest::ZERO);
        assert!(matches!(s.apply(&forged), Err(SessionError::Chain { seq: 5, .. })));
        let mut tampered = s.seal("f", 0, &body);
        tampered.actor = "mallory".into();
        assert!(matches!(s.apply(&tampered), Err(SessionError::Chain { .. })));
        let mut skipped = s.seal("f", 0, &body);
        skipped.seq = 7;
        assert!(matches!(s.apply(&skipped), Err(SessionError::Chain { seq: 7, .. })));
    }

    #[test]
    fn advance_requires_agreement_by_full_roster() {
        let mut s = Session::new(id("s"), RevisionPolicy::default());
        for i in 0..5 {
            let sid = format!("st{i}");
            s = submit(&s, EventKind::StakeholderRegistered, json!({"id": sid, "name": sid})).unwrap();
        }
        s = submit(&s, EventKind::GoalDrafted, json!({"text": "Goal."})).unwrap();
        assert!(matches!(s.advance_phase("f", 0), Err(SessionError::IncompletePhase { .. })));
        assert!(submit(&s, EventKind::GoalAgreed, json!({"roster": ["st0", "st1"]})).is_err());
        let s = submit(&s, EventKind::GoalAgreed, json!({"roster": ["st0", "st1", "st2", "st3", "st4"]})).unwrap();
        let s = s.advance_phase("f", 0).unwrap();
        assert_eq!(s.phase(), Phase::Obstacles);
    }

    #[test]
    fn obstacles_phase_lists_undecided_nodes() {
        let s = agreed_session(2).advance_phase("f", 0).unwrap();
        let s = submit(
            &s,
            EventKind::ObstacleSubdivided,
            json!({"obstacleId": "goal", "parts": [{"label": "a", "weight": 0.5}, {"label": "b", "weight": 0.5}]}),
        )
        .unwrap();
        let s = submit(&s, EventKind::LeafMarked, json!({"obstacleId": "o1"})).unwrap();
        match s.advance_phase("f", 0).unwrap_err() {
            SessionError::IncompletePhase { phase, unmet } => {
                assert_eq!(phase, Phase::Obstacles);
                assert_eq!(unmet.len(), 1);
                assert_eq!(unmet[0].id, Some(id("o2")));
            }
            other => panic!("unexpected {other:?}"),
        }
        let s = submit(&s, EventKind::LeafMarked, json!({"obstacleId": "o2"})).unwrap();
        let s = s.advance_phase("f", 0).unwrap();
        assert_eq!(s.phase(), Phase::Solutions);
        assert!(matches!(s.advance_phase("f", 0), Err(SessionError::IncompletePhase { .. })));
    }

    #[test]
    fn phase_advanced_payload_must_name_next_phase() {
        let s = agreed_session(1);
        let err = submit(&s, EventKind::PhaseAdvanced, json!({"to": "SOLUTIONS"})).unwrap_err();
        assert!(matches!(err, SessionError::PhaseMismatch { .. }));
    }

    fn implementation_session() -> Session {
        let mut s = agreed_session(1).advance_phase("f", 0).unwrap();
        s = submit(
            &s,
            EventKind::ObstacleAdded,
            json!({"label": "x", "parents": [ParentLink { parent: Id::root(), weight: 1.0 }]}),
        )
        .unwrap();
        s = submit(&s, EventKind::LeafMarked, json!({"obstacleId": "o1"})).unwrap();
        s = s.advance_phase("f", 0).unwrap();
        s = submit(&s, EventKind::SolutionAdded, json!({"leafId": "o1", "label": "fix", "share": 1.0})).unwrap();
        s = s.advance_phase("f", 0).unwrap();
        s.advance_phase("f", 0).unwrap()
    }

    #[test]
    fn revision_timing_warnings() {
        let s = implementation_session();
        assert_eq!(s.phase(), Phase::Implementation);
        let (late, warnings) = s.open_revision(RevisionScope::Minor, Phase::Obstacles, "f", 400 * DAY_MS).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(late.phase(), Phase::Obstacles);

        let (_, warnings) = s.open_revision(RevisionScope::Minor, Phase::Solutions, "f", 30 * DAY_MS).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].elapsed_ms, 30 * DAY_MS);
        assert_eq!(warnings[0].required_ms, 365 * DAY_MS);

        assert_eq!(
            s.open_revision(RevisionScope::Minor, Phase::Goal, "f", 0).unwrap_err(),
            SessionError::MinorCannotTargetGoal
        );
        let (major, _) = s.open_revision(RevisionScope::Major, Phase::Goal, "f", 2000 * DAY_MS).unwrap();
        assert_eq!(major.phase(), Phase::Goal);
        assert_eq!(
            agreed_session(1).open_revision(RevisionScope::Major, Phase::Goal, "f", 0).unwrap_err(),
            SessionError::NotInImplementation(Phase::Goal)
        );
    }

    #[test]
    fn revision_interval_runs_from_last_same_scope_revision() {
        let s = implementation_session();
        let (s, _) = s.open_revision(RevisionScope::Minor, Phase::Resources, "f", 400 * DAY_MS).unwrap();
        let s = s.advance_phase("f", 401 * DAY_MS).unwrap();
        let w = s.revision_warnings(RevisionScope::Minor, 500 * DAY_MS);
        assert_eq!(w[0].elapsed_ms, 100 * DAY_MS);
        assert!(s.revision_warnings(RevisionScope::Major, 1200 * DAY_MS).is_empty());
    }

    #[test]
    fn policy_validation() {
        assert!(RevisionPolicy::new(10, 5).is_err());
        assert!(RevisionPolicy::new(5, 10).is_ok());
        let p = RevisionPolicy::default();
        assert!(p.t_minor_ms < p.t_major_ms);
    }

    #[test]
    fn payload_errors_carry_path() {
        let s = Session::new(id("s"), RevisionPolicy::default());
        let err = submit(&s, EventKind::StakeholderRegistered, json!({"id": "a", "nmae": "typo"})).unwrap_err();
        assert_eq!(err.code(), "INVALID_PAYLOAD");
    }

    #[test]
    fn dependency_declaration_checks_nodes() {
        let s = implementation_session();
        let bad = submit(&s, EventKind::DependencyDeclared, json!({"from": "s1", "to": "ghost", "kind": "DEPENDS_ON"}));
        assert_eq!(bad.unwrap_err().code(), "DANGLING_DEPENDENCY");
        let ok = submit(&s, EventKind::DependencyDeclared, json!({"from": "s1", "to": "o1", "kind": "AGGRAVATES"})).unwrap();
        assert_eq!(ok.dependencies().len(), 1);
    }

    #[test]
    fn congruence_records_replace_per_stakeholder() {
        let s = agreed_session(1);
        let rec = json!({"stakeholderId": "st0", "mS": 10.0, "mC": 1.0, "mCbar": 0.5});
        let s = submit(&s, EventKind::CongruenceRecorded, rec).unwrap();
        let rec = json!({"stakeholderId": "st0", "mS": 10.0, "mC": 2.0, "mCbar": 0.5});
        let s = submit(&s, EventKind::CongruenceRecorded, rec).unwrap();
        assert_eq!(s.congruence().len(), 1);
        assert_eq!(s.congruence()[0].m_c, 2.0);
        let bad = json!({"stakeholderId": "st0", "mS": 0.0, "mC": 0.0, "mCbar": 0.0});
        assert_eq!(submit(&s, EventKind::CongruenceRecorded, bad).unwrap_err().code(), "NON_POSITIVE_MS");
    }
}
