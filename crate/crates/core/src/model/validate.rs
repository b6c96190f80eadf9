use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    InvalidId,
    DuplicateId,
    GoalEmpty,
    GoalSentenceCount,
    GoalRosterMismatch,
    UnknownParent,
    DuplicateParent,
    WeightOutOfRange,
    WeightSumViolation,
    Cycle,
    Unreachable,
    LeafWithChildren,
    UnknownNode,
    NotALeaf,
    ShareOutOfRange,
    ShareOverflow,
    ProgressOutOfRange,
    InvalidMetric,
    UnknownSolution,
    UnknownResource,
    DuplicateAssignment,
    InvalidSpend,
}

/// One broken invariant, located by a path such as `obstacles[o1].parents[goal]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, kind: ViolationKind, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { kind, path: path.into(), message: message.into() });
    }
}

fn in_unit(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x <= 1.0
}

/// Returns every invariant violation in the model; empty means valid.
pub fn validate(model: &ProblemModel) -> Vec<Violation> {
    let mut report = Report(Vec::new());
    check_ids(model, &mut report);
    check_goal(model, &mut report);
    check_obstacles(model, &mut report);
    check_solutions(model, &mut report);
    check_assignments(model, &mut report);
    report.0
}

fn check_ids(model: &ProblemModel, report: &mut Report) {
    let mut seen: BTreeSet<&str> = BTreeSet::from([GOAL_ROOT]);
    let entities = model
        .obstacles
        .iter()
        .map(|o| ("obstacles", &o.id))
        .chain(model.solutions.iter().map(|s| ("solutions", &s.id)))
        .chain(model.resources.iter().map(|r| ("resources", &r.id)));
    for (collection, id) in entities {
        let path = format!("{collection}[{id}]");
        if !Id::is_well_formed(id.as_str()) {
            report.push(ViolationKind::InvalidId, &path, format!("malformed id `{id}`"));
        }
        if !seen.insert(id.as_str()) {
            report.push(ViolationKind::DuplicateId, &path, format!("id `{id}` used more than once"));
        }
    }
    let mut stakeholders = BTreeSet::new();
    for s in &model.stakeholders {
        let path = format!("stakeholders[{}]", s.id);
        if !Id::is_well_formed(s.id.as_str()) {
            report.push(ViolationKind::InvalidId, &path, format!("malformed id `{}`", s.id));
        }
        if !stakeholders.insert(&s.id) {
            report.push(ViolationKind::DuplicateId, &path, format!("stakeholder `{}` registered twice", s.id));
        }
    }
}

fn check_goal(model: &ProblemModel, report: &mut Report) {
    let goal = &model.goal;
    if goal.status != GoalStatus::Agreed {
        return;
    }
    if goal.text.trim().is_empty() {
        report.push(ViolationKind::GoalEmpty, "goal.text", "agreed goal has no text");
    }
    let count = goal.effective_sentence_count();
    if !(1..=3).contains(&count) {
        report.push(
            ViolationKind::GoalSentenceCount,
            "goal.text",
            format!("agreed goal has {count} sentences"),
        );
    }
    let roster: BTreeSet<&Id> = model.stakeholders.iter().map(|s| &s.id).collect();
    let agreed: BTreeSet<&Id> = goal.agreed_by.iter().collect();
    if roster != agreed || agreed.len() != goal.agreed_by.len() {
        report.push(
            ViolationKind::GoalRosterMismatch,
            "goal.agreedBy",
            "agreement roster differs from registered stakeholders",
        );
    }
}

fn check_obstacles(model: &ProblemModel, report: &mut Report) {
    let known: BTreeSet<&str> = model.obstacles.iter().map(|o| o.id.as_str()).collect();
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();

    for node in &model.obstacles {
        let path = format!("obstacles[{}]", node.id);
        if node.parents.is_empty() {
            report.push(ViolationKind::Unreachable, &path, "obstacle has no parent");
        }
        let mut parents = BTreeSet::new();
        for link in &node.parents {
            let link_path = format!("{path}.parents[{}]", link.parent);
            if !link.parent.is_root() && !known.contains(link.parent.as_str()) {
                report.push(ViolationKind::UnknownParent, &link_path, format!("no obstacle `{}`", link.parent));
            }
            if !parents.insert(&link.parent) {
                report.push(ViolationKind::DuplicateParent, &link_path, "parent listed twice");
            }
            if !in_unit(link.weight) {
                report.push(
                    ViolationKind::WeightOutOfRange,
                    format!("{link_path}.weight"),
                    format!("weight {} outside (0, 1]", link.weight),
                );
            }
            *sums.entry(link.parent.as_str()).or_default() += link.weight;
        }
    }

    for (parent, sum) in &sums {
        if (sum - 1.0).abs() > TOLERANCE {
            let path = if *parent == GOAL_ROOT {
                "goal".to_string()
            } else {
                format!("obstacles[{parent}]")
            };
            report.push(
                ViolationKind::WeightSumViolation,
                path,
                format!("child weights sum to {sum}"),
            );
        }
        if let Some(node) = model.obstacle(parent) {
            if node.is_leaf {
                report.push(
                    ViolationKind::LeafWithChildren,
                    format!("obstacles[{parent}].isLeaf"),
                    "leaf obstacle has children",
                );
            }
        }
    }

    // Cycles: whatever Kahn's algorithm cannot drain.
    let index = model.child_index();
    let mut in_cycle = BTreeSet::new();
    if model.topological_order().is_none() {
        let position: BTreeMap<&str, usize> =
            model.obstacles.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();
        let mut pending: Vec<usize> = model
            .obstacles
            .iter()
            .map(|o| o.parents.iter().filter(|l| position.contains_key(l.parent.as_str())).count())
            .collect();
        let mut queue: Vec<usize> = (0..pending.len()).filter(|&i| pending[i] == 0).collect();
        while let Some(i) = queue.pop() {
            for &(c, _) in index.get(model.obstacles[i].id.as_str()).into_iter().flatten() {
                pending[c] -= 1;
                if pending[c] == 0 {
                    queue.push(c);
                }
            }
        }
        for (i, p) in pending.iter().enumerate() {
            if *p > 0 {
                let id = &model.obstacles[i].id;
                in_cycle.insert(id.as_str());
                report.push(ViolationKind::Cycle, format!("obstacles[{id}]"), "obstacle lies on a cycle");
            }
        }
    }

    let mut reached = BTreeSet::new();
    let mut stack = vec![GOAL_ROOT];
    while let Some(id) = stack.pop() {
        for &(c, _) in index.get(id).into_iter().flatten() {
            let child = model.obstacles[c].id.as_str();
            if reached.insert(child) {
                stack.push(child);
            }
        }
    }
    for node in &model.obstacles {
        let id = node.id.as_str();
        if !node.parents.is_empty() && !reached.contains(id) && !in_cycle.contains(id) {
            report.push(
                ViolationKind::Unreachable,
                format!("obstacles[{id}]"),
                "obstacle is not reachable from the goal",
            );
        }
    }
}

fn check_solutions(model: &ProblemModel, report: &mut Report) {
    let mut per_leaf: BTreeMap<&str, f64> = BTreeMap::new();
    for s in &model.solutions {
        let path = format!("solutions[{}]", s.id);
        match model.obstacle(s.leaf_obstacle_id.as_str()) {
            None => report.push(
                ViolationKind::UnknownNode,
                format!("{path}.leafObstacleId"),
                format!("no obstacle `{}`", s.leaf_obstacle_id),
            ),
            Some(node) if !node.is_leaf => report.push(
                ViolationKind::NotALeaf,
                format!("{path}.leafObstacleId"),
                format!("obstacle `{}` is not a leaf", s.leaf_obstacle_id),
            ),
            Some(_) => {}
        }
        if !in_unit(s.share) {
            report.push(ViolationKind::ShareOutOfRange, format!("{path}.share"), format!("share {}", s.share));
        }
        if !(s.progress.is_finite() && (0.0..=1.0).contains(&s.progress)) {
            report.push(
                ViolationKind::ProgressOutOfRange,
                format!("{path}.progress"),
                format!("progress {}", s.progress),
            );
        }
        for m in &s.metrics {
            if !m.value.is_finite() {
                report.push(ViolationKind::InvalidMetric, format!("{path}.metrics[{}]", m.name), "non-finite value");
            }
        }
        *per_leaf.entry(s.leaf_obstacle_id.as_str()).or_default() += s.share;
    }
    for (leaf, total) in per_leaf {
        if total > 1.0 + TOLERANCE {
            report.push(
                ViolationKind::ShareOverflow,
                format!("obstacles[{leaf}]"),
                format!("solution shares sum to {total}"),
            );
        }
    }
}

fn check_assignments(model: &ProblemModel, report: &mut Report) {
    let mut per_solution: BTreeMap<&str, f64> = BTreeMap::new();
    let mut pairs = BTreeSet::new();
    for a in &model.assignments {
        let path = format!("assignments[{}:{}]", a.resource_id, a.solution_id);
        if model.solution(a.solution_id.as_str()).is_none() {
            report.push(ViolationKind::UnknownSolution, format!("{path}.solutionId"), "unknown solution");
        }
        if model.resource(a.resource_id.as_str()).is_none() {
            report.push(ViolationKind::UnknownResource, format!("{path}.resourceId"), "unknown resource");
        }
        if !in_unit(a.share) {
            report.push(ViolationKind::ShareOutOfRange, format!("{path}.share"), format!("share {}", a.share));
        }
        if !(a.spend.is_finite() && a.spend >= 0.0) {
            report.push(ViolationKind::InvalidSpend, format!("{path}.spend"), format!("spend {}", a.spend));
        }
        if !pairs.insert((&a.resource_id, &a.solution_id)) {
            report.push(ViolationKind::DuplicateAssignment, &path, "pair assigned twice");
        }
        *per_solution.entry(a.solution_id.as_str()).or_default() += a.share;
    }
    for (solution, total) in per_solution {
        if total > 1.0 + TOLERANCE {
            report.push(
                ViolationKind::ShareOverflow,
                format!("solutions[{solution}]"),
                format!("assignment shares sum to {total}"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> Id {
        Id::new(s).unwrap()
    }

    fn node(name: &str, parents: &[(&str, f64)], leaf: bool) -> ObstacleNode {
        ObstacleNode {
            id: id(name),
            label: name.into(),
            parents: parents.iter().map(|(p, w)| ParentLink { parent: Id::unchecked(*p), weight: *w }).collect(),
            is_leaf: leaf,
        }
    }

    fn kinds(model: &ProblemModel) -> Vec<ViolationKind> {
        validate(model).into_iter().map(|v| v.kind).collect()
    }

    #[test]
    fn empty_model_is_valid() {
        assert!(validate(&ProblemModel::new(id("m"), "t")).is_empty());
    }

    #[test]
    fn weight_sum_below_one_reported_at_parent() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.obstacles.push(node("a", &[("goal", 1.0)], false));
        m.obstacles.push(node("b", &[("a", 0.4)], true));
        m.obstacles.push(node("c", &[("a", 0.5)], true));
        let v = validate(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::WeightSumViolation);
        assert_eq!(v[0].path, "obstacles[a]");
    }

    #[test]
    fn solution_on_non_leaf_from_raw_document() {
        let raw = r#"{"id":"m","title":"t","goal":{"text":"","currentStateDescription":"","status":"DRAFT","agreedBy":[]},
            "obstacles":[{"id":"o1","label":"x","parents":[{"parent":"goal","weight":1.0}],"isLeaf":false}],
            "solutions":[{"id":"s1","leafObstacleId":"o1","label":"s","share":0.5,"progress":0.0,"metrics":[]}],
            "resources":[],"assignments":[],"stakeholders":[]}"#;
        let m: ProblemModel = serde_json::from_str(raw).unwrap();
        assert_eq!(kinds(&m), vec![ViolationKind::NotALeaf]);
    }

    #[test]
    fn cycle_and_unreachable() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.obstacles.push(node("a", &[("goal", 1.0)], true));
        m.obstacles.push(node("b", &[("c", 1.0)], false));
        m.obstacles.push(node("c", &[("b", 1.0)], false));
        m.obstacles.push(node("d", &[], true));
        let k = kinds(&m);
        assert_eq!(k.iter().filter(|k| **k == ViolationKind::Cycle).count(), 2);
        assert!(k.contains(&ViolationKind::Unreachable));
        assert!(m.topological_order().is_none());
    }

    #[test]
    fn leaf_with_children_and_unknown_parent() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.obstacles.push(node("a", &[("goal", 1.0)], true));
        m.obstacles.push(node("b", &[("a", 1.0)], true));
        m.obstacles.push(node("x", &[("ghost", 1.0)], true));
        let k = kinds(&m);
        assert!(k.contains(&ViolationKind::LeafWithChildren));
        assert!(k.contains(&ViolationKind::UnknownParent));
        assert!(k.contains(&ViolationKind::Unreachable));
    }

    #[test]
    fn agreed_goal_checks() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.stakeholders.push(Stakeholder { id: id("a"), name: "a".into(), constituency: "".into() });
        m.goal.status = GoalStatus::Agreed;
        let k = kinds(&m);
        assert!(k.contains(&ViolationKind::GoalEmpty));
        assert!(k.contains(&ViolationKind::GoalSentenceCount));
        assert!(k.contains(&ViolationKind::GoalRosterMismatch));
    }

    #[test]
    fn assignment_violations() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.assignments.push(ResourceAssignment {
            resource_id: id("r"),
            solution_id: id("s"),
            share: 1.5,
            spend: -2.0,
        });
        let k = kinds(&m);
        for expected in [
            ViolationKind::UnknownSolution,
            ViolationKind::UnknownResource,
            ViolationKind::ShareOutOfRange,
            ViolationKind::InvalidSpend,
            ViolationKind::ShareOverflow,
        ] {
            assert!(k.contains(&expected), "{expected:?} missing from {k:?}");
        }
    }

    #[test]
    fn duplicate_ids_across_kinds() {
        let mut m = ProblemModel::new(id("m"), "t");
        m.obstacles.push(node("x", &[("goal", 1.0)], true));
        m.resources.push(Resource { id: id("x"), name: "r".into(), kind: ResourceKind::Other });
        m.resources.push(Resource { id: Id::unchecked("bad/id"), name: "r".into(), kind: ResourceKind::Other });
        let k = kinds(&m);
        assert!(k.contains(&ViolationKind::DuplicateId));
        assert!(k.contains(&ViolationKind::InvalidId));
    }
}
