//! Random event proposals against a live session. Most proposals are
//! plausible for the current phase so runs get deep; the rest are random
//! kinds, dangling ids and out-of-range numbers.

use psm_core::model::ResourceKind;
use psm_core::session::{EventKind, Phase, Session, SessionError};
use rand::Rng as _;
use serde_json::{json, Value};

use crate::gen::partition;
use crate::Rng;

fn pick<'a, T>(rng: &mut Rng, items: &'a [T]) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

fn some_id(rng: &mut Rng, ids: &[String]) -> String {
    if ids.is_empty() || rng.random_bool(0.05) {
        format!("ghost{}", rng.random_range(0..3))
    } else {
        pick(rng, ids).cloned().unwrap_or_default()
    }
}

fn fraction(rng: &mut Rng) -> f64 {
    match rng.random_range(0..20) {
        0 => -0.1,
        1 => 1.5,
        2 => 0.0,
        3 => 1.0,
        _ => rng.random_range(0.05..0.95),
    }
}

fn weights(rng: &mut Rng, k: usize) -> Vec<f64> {
    let mut w = partition(rng, k);
    if rng.random_bool(0.05) {
        w[0] += 0.1;
    }
    w
}

/// One candidate `(kind, payload)` for `session`.
pub fn propose(rng: &mut Rng, session: &Session) -> (EventKind, Value) {
    let model = session.model();
    let stakeholders: Vec<String> = model.stakeholders.iter().map(|s| s.id.to_string()).collect();
    let obstacles: Vec<String> = model.obstacles.iter().map(|o| o.id.to_string()).collect();
    let childless: Vec<String> =
        model.obstacles.iter().filter(|o| !model.has_children(o.id.as_str())).map(|o| o.id.to_string()).collect();
    let leaves: Vec<String> = model.obstacles.iter().filter(|o| o.is_leaf).map(|o| o.id.to_string()).collect();
    let solutions: Vec<String> = model.solutions.iter().map(|s| s.id.to_string()).collect();
    let resources: Vec<String> = model.resources.iter().map(|r| r.id.to_string()).collect();

    let phase = session.phase();
    let kind = if rng.random_bool(0.1) {
        *pick(rng, &EventKind::ALL).expect("non-empty")
    } else if session.unmet_for_advance().is_empty() && phase.next().is_some() && rng.random_bool(0.25) {
        EventKind::PhaseAdvanced
    } else {
        let open = model.obstacles.iter().filter(|o| !o.is_leaf && !model.has_children(o.id.as_str())).count();
        let plausible: &[EventKind] = match phase {
            Phase::Goal if model.goal.text.is_empty() => &[EventKind::StakeholderRegistered, EventKind::GoalDrafted],
            Phase::Goal => &[
                EventKind::StakeholderRegistered,
                EventKind::GoalEdited,
                EventKind::GoalAgreed,
                EventKind::GoalAgreed,
                EventKind::GoalAgreed,
                EventKind::CongruenceRecorded,
            ],
            Phase::Obstacles if model.obstacles.len() >= 6 && open > 0 => {
                &[EventKind::LeafMarked, EventKind::LeafMarked, EventKind::LeafMarked, EventKind::WeightsSet]
            }
            Phase::Obstacles => &[
                EventKind::ObstacleSubdivided,
                EventKind::ObstacleSubdivided,
                EventKind::ObstacleAdded,
                EventKind::WeightsSet,
                EventKind::LeafMarked,
                EventKind::LeafMarked,
            ],
            Phase::Solutions => &[EventKind::SolutionAdded],
            Phase::Resources => &[EventKind::ResourceRegistered, EventKind::ResourceAssigned],
            Phase::Implementation => &[
                EventKind::ProgressReported,
                EventKind::ProgressReported,
                EventKind::SpendReported,
                EventKind::SpendReported,
                EventKind::DependencyDeclared,
                EventKind::CongruenceRecorded,
                EventKind::MinorRevisionOpened,
                EventKind::MajorRevisionOpened,
            ],
        };
        *pick(rng, plausible).expect("non-empty")
    };

    let n = session.head_seq();
    let payload = match kind {
        EventKind::StakeholderRegistered => {
            let sid = if rng.random_bool(0.1) { some_id(rng, &stakeholders) } else { format!("p{n}") };
            json!({ "id": sid, "name": format!("Stakeholder {n}") })
        }
        EventKind::GoalDrafted | EventKind::GoalEdited => {
            let text = match rng.random_range(0..6) {
                0 => "".to_string(),
                1 => "One. Two. Three. Four.".to_string(),
                _ => format!("Goal draft {n} for the group."),
            };
            json!({ "text": text })
        }
        EventKind::GoalAgreed => {
            let mut roster = stakeholders.clone();
            if rng.random_bool(0.15) && !roster.is_empty() {
                roster.pop();
            }
            json!({ "roster": roster })
        }
        EventKind::PhaseAdvanced => {
            let to = if rng.random_bool(0.9) { phase.next().unwrap_or(Phase::Goal) } else { *pick(rng, &Phase::ALL).expect("non-empty") };
            json!({ "to": to })
        }
        EventKind::ObstacleSubdivided => {
            let target = if model.obstacles.is_empty() || rng.random_bool(0.1) {
                "goal".to_string()
            } else {
                let pool = if rng.random_bool(0.9) { &childless } else { &obstacles };
                some_id(rng, pool)
            };
            let k = rng.random_range(1..=4);
            let parts: Vec<Value> =
                weights(rng, k).into_iter().map(|w| json!({ "label": format!("part {n}"), "weight": w })).collect();
            json!({ "obstacleId": target, "parts": parts })
        }
        EventKind::ObstacleAdded => {
            let parent = if obstacles.is_empty() || rng.random_bool(0.3) { "goal".to_string() } else { some_id(rng, &obstacles) };
            let has_kids = model.has_children(&parent);
            let weight = if has_kids { fraction(rng).min(0.9) } else { 1.0 };
            json!({ "label": format!("added {n}"), "parents": [{ "parent": parent, "weight": weight }] })
        }
        EventKind::WeightsSet => {
            let mut parents: Vec<String> = obstacles.iter().filter(|o| model.has_children(o)).cloned().collect();
            parents.push("goal".into());
            let parent = pick(rng, &parents).cloned().unwrap_or_else(|| "goal".into());
            let kids: Vec<String> = model.children_of(&parent).map(|(o, _)| o.id.to_string()).collect();
            let ws = weights(rng, kids.len().max(1));
            let list: Vec<Value> = kids.iter().zip(ws).map(|(c, w)| json!({ "child": c, "weight": w })).collect();
            json!({ "parent": parent, "weights": list })
        }
        EventKind::LeafMarked => {
            let open: Vec<String> = model
                .obstacles
                .iter()
                .filter(|o| !o.is_leaf && !model.has_children(o.id.as_str()))
                .map(|o| o.id.to_string())
                .collect();
            let pool = if !open.is_empty() && rng.random_bool(0.9) { &open } else { &obstacles };
            json!({ "obstacleId": some_id(rng, pool) })
        }
        EventKind::SolutionAdded => {
            let uncovered: Vec<String> =
                leaves.iter().filter(|l| model.solutions_of(l).next().is_none()).cloned().collect();
            let pool = if !uncovered.is_empty() && rng.random_bool(0.8) { &uncovered } else { &leaves };
            json!({ "leafId": some_id(rng, pool), "label": format!("solution {n}"), "share": fraction(rng) })
        }
        EventKind::ResourceRegistered => {
            let kind = *pick(rng, &[ResourceKind::Government, ResourceKind::Corporate, ResourceKind::Citizen])
                .expect("non-empty");
            json!({ "name": format!("resource {n}"), "kind": kind })
        }
        EventKind::ResourceAssigned => json!({
            "resourceId": some_id(rng, &resources),
            "solutionId": some_id(rng, &solutions),
            "share": fraction(rng),
            "spend": rng.random_range(0.0..1000.0),
        }),
        EventKind::ProgressReported => json!({
            "solutionId": some_id(rng, &solutions),
            "progress": fraction(rng),
            "metrics": [{ "name": "units", "value": rng.random_range(0.0..100.0), "unit": "count" }],
        }),
        EventKind::SpendReported => {
            let pair = pick(rng, &model.assignments).map(|a| (a.resource_id.to_string(), a.solution_id.to_string()));
            let (r, s) = pair.unwrap_or_else(|| (some_id(rng, &resources), some_id(rng, &solutions)));
            let spend = if rng.random_bool(0.05) { -5.0 } else { rng.random_range(0.0..5000.0) };
            json!({ "resourceId": r, "solutionId": s, "spend": spend })
        }
        EventKind::DependencyDeclared => {
            let mut nodes = leaves.clone();
            nodes.extend(solutions.iter().cloned());
            nodes.extend(resources.iter().cloned());
            json!({ "from": some_id(rng, &nodes), "to": some_id(rng, &nodes), "kind": "DEPENDS_ON" })
        }
        EventKind::CongruenceRecorded => {
            let refactored: Vec<String> = obstacles.iter().take(rng.random_range(0..=2)).cloned().collect();
            let m_obar: Vec<f64> = refactored.iter().map(|_| rng.random_range(0.0..1.0)).collect();
            json!({
                "stakeholderId": some_id(rng, &stakeholders),
                "mS": rng.random_range(0.1..10.0),
                "mC": rng.random_range(0.0..2.0),
                "mCbar": rng.random_range(0.0..2.0),
                "refactoredObstacleIds": refactored,
                "mObar": m_obar,
            })
        }
        EventKind::MinorRevisionOpened | EventKind::MajorRevisionOpened => {
            json!({ "targetPhase": pick(rng, &Phase::ALL).expect("non-empty") })
        }
    };
    (kind, payload)
}

/// Outcome of one fuzzed submission.
pub struct Step {
    pub phase_before: Phase,
    pub kind: EventKind,
    pub result: Result<(), SessionError>,
}

/// Runs `len` proposals, keeping accepted events. `check` sees each
/// successor session after an acceptance.
pub fn run(rng: &mut Rng, session_id: &str, len: usize, mut check: impl FnMut(&Step, &Session)) -> Session {
    let id = psm_core::model::Id::new(session_id).expect("well-formed session id");
    let mut session = Session::new(id, psm_core::session::RevisionPolicy::default());
    for i in 0..len {
        let (kind, payload) = propose(rng, &session);
        let phase_before = session.phase();
        let ts = crate::fixtures::BASE_TS + 3_600_000 * i as i64;
        let actor = if rng.random_bool(0.02) { "" } else { "fuzzer" };
        match session.submit_raw_mut(actor, ts, kind, &payload) {
            Ok(_) => check(&Step { phase_before, kind, result: Ok(()) }, &session),
            Err(err) => check(&Step { phase_before, kind, result: Err(err) }, &session),
        }
    }
    session
}
