//! Scripted sessions reproducing the reference model shapes. Every fixture is
//! an event sequence, so it exercises the gate and the operations as well.

use psm_core::applicability::{CongruenceRecord, ParasiticEdge, ParasiticKind};
use psm_core::model::{Id, ParentLink, ResourceKind};
use psm_core::session::*;

pub const INNOVATION_GOAL: &str =
    "Make the innovation and start-up eco-system in our country renowned in the world, sustainably.";
pub const HARLEM_GOAL: &str = "Our children in these 100 blocks of Harlem will enjoy a school and community ecosystem that will eliminate the education gap between them and successful, suburban students.";

pub const STREETLIGHT_CHAIN: [&str; 4] = [
    "Unsafe neighborhoods",
    "Crime committed on the streets",
    "Crime-prone street conditions",
    "Streets too dark at night",
];
pub const STREETLIGHT_SOLUTIONS: [&str; 4] = [
    "Install new streetlamps",
    "Replace street lighting",
    "Fix street lighting",
    "Adjust the automatic switch on/off times",
];

pub const SIX_THEMES: [&str; 6] = [
    "Access to early-stage capital",
    "Regulatory and administrative burden",
    "Talent and skills pipeline",
    "Research commercialization",
    "Entrepreneurial culture and risk tolerance",
    "Access to markets",
];

pub const BASE_TS: i64 = 1_700_000_000_000;
pub const STEP_MS: i64 = 60_000;

fn id(s: &str) -> Id {
    Id::new(s).expect("fixture ids are well formed")
}

/// An ordered list of event bodies with a fluent builder.
#[derive(Debug, Clone, Default)]
pub struct Script {
    pub bodies: Vec<EventBody>,
}

impl Script {
    pub fn new() -> Self {
        Script::default()
    }

    pub fn push(mut self, body: EventBody) -> Self {
        self.bodies.push(body);
        self
    }

    pub fn stakeholder(self, sid: &str, name: &str) -> Self {
        self.push(EventBody::StakeholderRegistered(StakeholderRegistered {
            id: id(sid),
            name: name.into(),
            constituency: String::new(),
        }))
    }

    pub fn draft(self, text: &str) -> Self {
        self.push(EventBody::GoalDrafted(GoalPayload {
            text: text.into(),
            current_state_description: None,
            sentence_count_override: None,
            title: None,
        }))
    }

    pub fn agree(self, roster: &[&str]) -> Self {
        self.push(EventBody::GoalAgreed(GoalAgreed { roster: roster.iter().map(|s| id(s)).collect() }))
    }

    pub fn advance(self, to: Phase) -> Self {
        self.push(EventBody::PhaseAdvanced(PhaseAdvanced { to }))
    }

    /// Two stakeholders agree on `goal` and the session moves to OBSTACLES.
    pub fn agreed_goal(goal: &str) -> Self {
        Script::new()
            .stakeholder("p1", "Facilitated stakeholder one")
            .stakeholder("p2", "Facilitated stakeholder two")
            .draft(goal)
            .agree(&["p1", "p2"])
            .advance(Phase::Obstacles)
    }

    pub fn subdivide(self, parent: &str, parts: &[(&str, &str, f64)]) -> Self {
        self.push(EventBody::ObstacleSubdivided(ObstacleSubdivided {
            obstacle_id: id(parent),
            parts: parts
                .iter()
                .map(|(pid, label, weight)| PartPayload { id: Some(id(pid)), label: (*label).into(), weight: *weight })
                .collect(),
        }))
    }

    pub fn add_obstacle(self, oid: &str, label: &str, parents: &[(&str, f64)]) -> Self {
        self.push(EventBody::ObstacleAdded(ObstacleAdded {
            id: Some(id(oid)),
            label: label.into(),
            parents: parents.iter().map(|(p, w)| ParentLink { parent: id(p), weight: *w }).collect(),
        }))
    }

    pub fn leaf(self, oid: &str) -> Self {
        self.push(EventBody::LeafMarked(LeafMarked { obstacle_id: id(oid) }))
    }

    pub fn solution(self, sid: &str, leaf: &str, label: &str, share: f64) -> Self {
        self.push(EventBody::SolutionAdded(SolutionAdded {
            id: Some(id(sid)),
            leaf_id: id(leaf),
            label: label.into(),
            share,
        }))
    }

    pub fn resource(self, rid: &str, name: &str, kind: ResourceKind) -> Self {
        self.push(EventBody::ResourceRegistered(ResourceRegistered { id: Some(id(rid)), name: name.into(), kind }))
    }

    pub fn assign(self, rid: &str, sid: &str, share: f64, spend: f64) -> Self {
        self.push(EventBody::ResourceAssigned(ResourceAssigned {
            resource_id: id(rid),
            solution_id: id(sid),
            share,
            spend,
        }))
    }

    pub fn progress(self, sid: &str, progress: f64) -> Self {
        self.push(EventBody::ProgressReported(ProgressReported { solution_id: id(sid), progress, metrics: vec![] }))
    }

    pub fn spend(self, rid: &str, sid: &str, spend: f64) -> Self {
        self.push(EventBody::SpendReported(SpendReported { resource_id: id(rid), solution_id: id(sid), spend }))
    }

    pub fn depends(self, from: &str, to: &str, kind: ParasiticKind) -> Self {
        self.push(EventBody::DependencyDeclared(ParasiticEdge { from: id(from), to: id(to), kind, note: String::new() }))
    }

    pub fn congruence(self, record: CongruenceRecord) -> Self {
        self.push(EventBody::CongruenceRecorded(record))
    }

    /// Submits every body in order from a fresh session.
    pub fn play(&self, session_id: &str) -> Result<(Session, Vec<Event>), SessionError> {
        self.play_from(Session::new(id(session_id), RevisionPolicy::default()))
    }

    pub fn play_from(&self, mut session: Session) -> Result<(Session, Vec<Event>), SessionError> {
        let mut events = Vec::new();
        for body in &self.bodies {
            let ts = BASE_TS + STEP_MS * session.head_seq() as i64;
            let (next, event, _) = session.submit("facilitator", ts, body)?;
            session = next;
            events.push(event);
        }
        Ok((session, events))
    }
}

/// One obstacle, one solution.
pub fn fig1a() -> Script {
    Script::agreed_goal("Keep studying under plentiful light.")
        .subdivide("goal", &[("o1", "Room lighting is off", 1.0)])
        .leaf("o1")
        .advance(Phase::Solutions)
        .solution("s1", "o1", "Turn on the light switch", 1.0)
}

/// Two obstacles, o2 slightly larger, each with its own solution.
pub fn fig1b() -> Script {
    Script::agreed_goal("Reach the goal state.")
        .subdivide("goal", &[("o1", "Obstacle one", 0.45), ("o2", "Obstacle two", 0.55)])
        .leaf("o1")
        .leaf("o2")
        .advance(Phase::Solutions)
        .solution("s1", "o1", "Solution one", 1.0)
        .solution("s2", "o2", "Solution two", 1.0)
}

/// As (b) but o2 has two proportional solutions.
pub fn fig1c() -> Script {
    Script::agreed_goal("Reach the goal state.")
        .subdivide("goal", &[("o1", "Obstacle one", 0.45), ("o2", "Obstacle two", 0.55)])
        .leaf("o1")
        .leaf("o2")
        .advance(Phase::Solutions)
        .solution("s1", "o1", "Solution one", 1.0)
        .solution("s2-1", "o2", "Solution two, first", 0.4)
        .solution("s2-2", "o2", "Solution two, second", 0.6)
}

/// As (c) with o1 subdivided into two sub-obstacles, one solution each.
pub fn fig1d() -> Script {
    Script::agreed_goal("Reach the goal state.")
        .subdivide("goal", &[("o1", "Obstacle one", 0.45), ("o2", "Obstacle two", 0.55)])
        .subdivide("o1", &[("o1-1", "Obstacle one, part one", 0.5), ("o1-2", "Obstacle one, part two", 0.5)])
        .leaf("o1-1")
        .leaf("o1-2")
        .leaf("o2")
        .advance(Phase::Solutions)
        .solution("s1-1", "o1-1", "Solution for part one", 1.0)
        .solution("s1-2", "o1-2", "Solution for part two", 1.0)
        .solution("s2-1", "o2", "Solution two, first", 0.4)
        .solution("s2-2", "o2", "Solution two, second", 0.6)
}

/// As (d) with two cooperating resources on s1-1, the second contributing more.
pub fn fig1e() -> Script {
    fig1d()
        .advance(Phase::Resources)
        .resource("r1-1-1", "First cooperating resource", ResourceKind::Citizen)
        .resource("r1-1-2", "Second cooperating resource", ResourceKind::Government)
        .assign("r1-1-1", "s1-1", 0.25, 0.0)
        .assign("r1-1-2", "s1-1", 0.75, 0.0)
}

/// Six equally weighted themes under the innovation goal.
pub fn fig2_themes() -> Script {
    let parts: Vec<(String, &str)> = SIX_THEMES.iter().enumerate().map(|(i, t)| (format!("t{}", i + 1), *t)).collect();
    let refs: Vec<(&str, &str, f64)> = parts.iter().map(|(pid, label)| (pid.as_str(), *label, 1.0 / 6.0)).collect();
    Script::agreed_goal(INNOVATION_GOAL).subdivide("goal", &refs)
}

/// The six themes, each subdivided into components, all marked leaf.
pub fn fig2_subdivided() -> Script {
    let mut script = fig2_themes();
    for t in 1..=6 {
        let theme = format!("t{t}");
        let k = if t % 2 == 0 { 2 } else { 3 };
        let ids: Vec<String> = (1..=k).map(|c| format!("{theme}-{c}")).collect();
        let labels: Vec<String> = (1..=k).map(|c| format!("{} component {c}", SIX_THEMES[t - 1])).collect();
        let parts: Vec<(&str, &str, f64)> =
            ids.iter().zip(&labels).map(|(i, l)| (i.as_str(), l.as_str(), 1.0 / k as f64)).collect();
        script = script.subdivide(&theme, &parts);
        for i in &ids {
            script = script.leaf(i);
        }
    }
    script
}

/// Unsafe neighborhoods drilled down to dark streets with four solutions.
pub fn streetlights() -> Script {
    Script::agreed_goal("Residents feel safe walking their neighborhood at any hour.")
        .subdivide("goal", &[("u", STREETLIGHT_CHAIN[0], 1.0)])
        .subdivide("u", &[("u-1", STREETLIGHT_CHAIN[1], 0.5), ("u-2", "Other sources of insecurity", 0.5)])
        .subdivide("u-1", &[("u-1-1", STREETLIGHT_CHAIN[2], 1.0)])
        .subdivide("u-1-1", &[("u-1-1-1", STREETLIGHT_CHAIN[3], 1.0)])
        .leaf("u-1-1-1")
        .leaf("u-2")
        .advance(Phase::Solutions)
        .solution("sl1", "u-1-1-1", STREETLIGHT_SOLUTIONS[0], 0.25)
        .solution("sl2", "u-1-1-1", STREETLIGHT_SOLUTIONS[1], 0.25)
        .solution("sl3", "u-1-1-1", STREETLIGHT_SOLUTIONS[2], 0.25)
        .solution("sl4", "u-1-1-1", STREETLIGHT_SOLUTIONS[3], 0.25)
        .solution("sx", "u-2", "Community patrols", 1.0)
}

/// Figure (e) carried into implementation with progress and spend.
pub fn fig1e_implementation() -> Script {
    fig1e()
        .advance(Phase::Implementation)
        .progress("s1-1", 0.5)
        .spend("r1-1-1", "s1-1", 1_000.0)
        .spend("r1-1-2", "s1-1", 3_000.0)
}

/// A session in each phase, reached through the figure fixtures.
pub fn session_in(phase: Phase) -> Session {
    let script = match phase {
        Phase::Goal => Script::new().stakeholder("p1", "One").stakeholder("p2", "Two").draft(INNOVATION_GOAL),
        Phase::Obstacles => fig2_themes(),
        Phase::Solutions => fig1d(),
        Phase::Resources => fig1e(),
        Phase::Implementation => fig1e_implementation(),
    };
    let (session, _) = script.play("fixture").expect("fixture scripts are admissible");
    assert_eq!(session.phase(), phase);
    session
}
