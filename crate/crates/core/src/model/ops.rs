//! Guarded, pure mutations. Each operation borrows a snapshot and returns a
//! new one; the input is never touched.

use std::collections::BTreeSet;

use super::*;
use crate::canonical::quantize;

/// Counts sentences: maximal segments ended by `.`, `!` or `?` that are
/// followed by whitespace or end of text. A trailing unterminated segment
/// with content counts as one more.
pub fn sentence_count(text: &str) -> usize {
    let is_terminator = |c: char| matches!(c, '.' | '!' | '?');
    let mut count = 0;
    let mut has_content = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if is_terminator(c) {
            let boundary = chars.peek().is_none_or(|next| next.is_whitespace());
            if boundary {
                if has_content {
                    count += 1;
                }
                has_content = false;
            }
        } else if !c.is_whitespace() {
            has_content = true;
        }
    }
    if has_content {
        count += 1;
    }
    count
}

/// Text fields accepted by goal drafting and editing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalText {
    pub text: String,
    pub current_state_description: Option<String>,
    pub sentence_count_override: Option<u32>,
}

/// One child produced by [`subdivide_obstacle`].
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub id: Option<Id>,
    pub label: String,
    pub weight: f64,
}

impl Part {
    pub fn new(label: impl Into<String>, weight: f64) -> Self {
        Part { id: None, label: label.into(), weight }
    }

    pub fn with_id(id: Id, label: impl Into<String>, weight: f64) -> Self {
        Part { id: Some(id), label: label.into(), weight }
    }
}

fn check_fraction(x: f64, err: impl Fn(f64) -> ModelError) -> Result<f64, ModelError> {
    if x.is_finite() && x > 0.0 && x <= 1.0 {
        Ok(quantize(x))
    } else {
        Err(err(x))
    }
}

fn claim_id(model: &ProblemModel, taken: &BTreeSet<Id>, id: Id) -> Result<Id, ModelError> {
    if !Id::is_well_formed(id.as_str()) {
        return Err(ModelError::InvalidId(id.as_str().to_string()));
    }
    if model.entity_id_in_use(id.as_str()) || taken.contains(&id) {
        return Err(ModelError::DuplicateId(id));
    }
    Ok(id)
}

fn fresh_id(model: &ProblemModel, taken: &BTreeSet<Id>, prefix: &str, start: usize) -> Id {
    (start..)
        .map(|k| Id::unchecked(format!("{prefix}{k}")))
        .find(|id| !model.entity_id_in_use(id.as_str()) && !taken.contains(id))
        .expect("unbounded search finds a free id")
}

fn child_prefix(parent: &str) -> String {
    if parent == GOAL_ROOT {
        "o".to_string()
    } else {
        format!("{parent}-")
    }
}

fn require_obstacle_or_root(model: &ProblemModel, id: &Id) -> Result<(), ModelError> {
    if id.is_root() || model.obstacle(id.as_str()).is_some() {
        Ok(())
    } else {
        Err(ModelError::UnknownNode(id.clone()))
    }
}

fn obstacle_mut<'a>(model: &'a mut ProblemModel, id: &Id) -> Result<&'a mut ObstacleNode, ModelError> {
    model
        .obstacles
        .iter_mut()
        .find(|o| o.id == *id)
        .ok_or_else(|| ModelError::UnknownNode(id.clone()))
}

pub fn register_stakeholder(model: &ProblemModel, stakeholder: Stakeholder) -> Result<ProblemModel, ModelError> {
    if !Id::is_well_formed(stakeholder.id.as_str()) {
        return Err(ModelError::InvalidId(stakeholder.id.as_str().to_string()));
    }
    if model.stakeholders.iter().any(|s| s.id == stakeholder.id) {
        return Err(ModelError::DuplicateId(stakeholder.id));
    }
    let mut next = model.clone();
    next.stakeholders.push(stakeholder);
    // A newcomer has not confirmed the goal yet.
    if next.goal.status == GoalStatus::Agreed {
        next.goal.status = GoalStatus::Draft;
        next.goal.agreed_by.clear();
    }
    Ok(next)
}

pub fn draft_goal(model: &ProblemModel, draft: GoalText) -> Result<ProblemModel, ModelError> {
    if !model.goal.text.is_empty() {
        return Err(ModelError::GoalAlreadyDrafted);
    }
    write_goal(model, draft)
}

/// Replaces the goal text. An agreed goal drops back to draft.
pub fn edit_goal(model: &ProblemModel, draft: GoalText) -> Result<ProblemModel, ModelError> {
    if model.goal.text.is_empty() {
        return Err(ModelError::NoDraft);
    }
    write_goal(model, draft)
}

fn write_goal(model: &ProblemModel, draft: GoalText) -> Result<ProblemModel, ModelError> {
    let mut next = model.clone();
    let goal = &mut next.goal;
    goal.text = draft.text;
    if let Some(state) = draft.current_state_description {
        goal.current_state_description = state;
    }
    goal.sentence_count_override = draft.sentence_count_override;
    goal.status = GoalStatus::Draft;
    goal.agreed_by.clear();
    Ok(next)
}

/// Records agreement. `roster` must be exactly the registered stakeholders.
pub fn agree_goal(model: &ProblemModel, roster: &[Id]) -> Result<ProblemModel, ModelError> {
    if model.stakeholders.is_empty() {
        return Err(ModelError::NoStakeholders);
    }
    if model.goal.text.trim().is_empty() {
        return Err(ModelError::NoDraft);
    }
    let count = model.goal.effective_sentence_count();
    if !(1..=3).contains(&count) {
        return Err(ModelError::SentenceCount(count));
    }
    let registered: BTreeSet<&Id> = model.stakeholders.iter().map(|s| &s.id).collect();
    let given: BTreeSet<&Id> = roster.iter().collect();
    if registered != given || given.len() != roster.len() {
        let missing = registered.difference(&given).map(|id| (*id).clone()).collect();
        let mut unexpected: Vec<Id> = given.difference(&registered).map(|id| (*id).clone()).collect();
        if unexpected.is_empty() && given.len() != roster.len() {
            // duplicates in the roster
            let mut seen = BTreeSet::new();
            unexpected = roster.iter().filter(|id| !seen.insert(*id)).cloned().collect();
        }
        return Err(ModelError::RosterMismatch { missing, unexpected });
    }
    let mut next = model.clone();
    next.goal.status = GoalStatus::Agreed;
    next.goal.agreed_by = model.stakeholders.iter().map(|s| s.id.clone()).collect();
    Ok(next)
}

/// Adds one obstacle under each listed parent. Under a parent that already
/// has children the new weight must be below 1 and the existing siblings are
/// scaled by `1 - weight`; under a childless parent the weight must be 1.
pub fn add_obstacle(
    model: &ProblemModel,
    id: Option<Id>,
    label: impl Into<String>,
    parents: &[(Id, f64)],
) -> Result<ProblemModel, ModelError> {
    if parents.is_empty() {
        return Err(ModelError::Empty);
    }
    let mut seen = BTreeSet::new();
    let mut links = Vec::with_capacity(parents.len());
    for (parent, weight) in parents {
        require_obstacle_or_root(model, parent)?;
        if !seen.insert(parent.clone()) {
            return Err(ModelError::DuplicateParent(parent.clone()));
        }
        if model.solutions_of(parent.as_str()).next().is_some() {
            return Err(ModelError::HasSolutions(parent.clone()));
        }
        let weight = check_fraction(*weight, ModelError::WeightOutOfRange)?;
        let has_siblings = model.has_children(parent.as_str());
        if has_siblings && weight >= 1.0 {
            return Err(ModelError::WeightSumViolation { parent: parent.clone(), sum: 1.0 + weight });
        }
        if !has_siblings && (weight - 1.0).abs() > TOLERANCE {
            return Err(ModelError::WeightSumViolation { parent: parent.clone(), sum: weight });
        }
        links.push(ParentLink { parent: parent.clone(), weight });
    }
    let taken = BTreeSet::new();
    let id = match id {
        Some(id) => claim_id(model, &taken, id)?,
        None => {
            let first = &parents[0].0;
            let start = model.children_of(first.as_str()).count() + 1;
            fresh_id(model, &taken, &child_prefix(first.as_str()), start)
        }
    };

    let mut next = model.clone();
    for link in &links {
        let scale = 1.0 - link.weight;
        for node in next.obstacles.iter_mut() {
            for existing in node.parents.iter_mut().filter(|l| l.parent == link.parent) {
                existing.weight = quantize(existing.weight * scale);
            }
        }
        if !link.parent.is_root() {
            obstacle_mut(&mut next, &link.parent)?.is_leaf = false;
        }
    }
    next.obstacles.push(ObstacleNode { id, label: label.into(), parents: links, is_leaf: false });
    Ok(next)
}

/// Splits a childless obstacle (or the goal root) into weighted parts.
pub fn subdivide_obstacle(model: &ProblemModel, obstacle_id: &Id, parts: &[Part]) -> Result<ProblemModel, ModelError> {
    require_obstacle_or_root(model, obstacle_id)?;
    if model.solutions_of(obstacle_id.as_str()).next().is_some() {
        return Err(ModelError::HasSolutions(obstacle_id.clone()));
    }
    if model.has_children(obstacle_id.as_str()) {
        return Err(ModelError::HasChildren(obstacle_id.clone()));
    }
    if parts.is_empty() {
        return Err(ModelError::Empty);
    }
    let mut weights = Vec::with_capacity(parts.len());
    for part in parts {
        weights.push(check_fraction(part.weight, ModelError::WeightOutOfRange)?);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > TOLERANCE {
        return Err(ModelError::WeightSumViolation { parent: obstacle_id.clone(), sum });
    }

    let prefix = child_prefix(obstacle_id.as_str());
    let mut taken = BTreeSet::new();
    let mut children = Vec::with_capacity(parts.len());
    for (k, (part, weight)) in parts.iter().zip(weights).enumerate() {
        let id = match &part.id {
            Some(id) => claim_id(model, &taken, id.clone())?,
            None => fresh_id(model, &taken, &prefix, k + 1),
        };
        taken.insert(id.clone());
        children.push(ObstacleNode {
            id,
            label: part.label.clone(),
            parents: vec![ParentLink { parent: obstacle_id.clone(), weight }],
            is_leaf: false,
        });
    }

    let mut next = model.clone();
    if !obstacle_id.is_root() {
        obstacle_mut(&mut next, obstacle_id)?.is_leaf = false;
    }
    next.obstacles.extend(children);
    Ok(next)
}

/// Replaces the weights of all children of `parent` at once.
pub fn set_weights(model: &ProblemModel, parent: &Id, weights: &[(Id, f64)]) -> Result<ProblemModel, ModelError> {
    require_obstacle_or_root(model, parent)?;
    let current: BTreeSet<&str> = model.children_of(parent.as_str()).map(|(o, _)| o.id.as_str()).collect();
    let given: BTreeSet<&str> = weights.iter().map(|(id, _)| id.as_str()).collect();
    if current.is_empty() || current != given || given.len() != weights.len() {
        return Err(ModelError::ChildSetMismatch { parent: parent.clone() });
    }
    let mut checked = Vec::with_capacity(weights.len());
    for (child, w) in weights {
        checked.push((child, check_fraction(*w, ModelError::WeightOutOfRange)?));
    }
    let sum: f64 = checked.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > TOLERANCE {
        return Err(ModelError::WeightSumViolation { parent: parent.clone(), sum });
    }
    let mut next = model.clone();
    for (child, w) in checked {
        let node = obstacle_mut(&mut next, child)?;
        for link in node.parents.iter_mut().filter(|l| l.parent == *parent) {
            link.weight = w;
        }
    }
    Ok(next)
}

/// Marks a childless obstacle as a leaf. Idempotent.
pub fn mark_leaf(model: &ProblemModel, obstacle_id: &Id) -> Result<ProblemModel, ModelError> {
    if model.obstacle(obstacle_id.as_str()).is_none() {
        return Err(ModelError::UnknownNode(obstacle_id.clone()));
    }
    if model.has_children(obstacle_id.as_str()) {
        return Err(ModelError::HasChildren(obstacle_id.clone()));
    }
    let mut next = model.clone();
    obstacle_mut(&mut next, obstacle_id)?.is_leaf = true;
    Ok(next)
}

pub fn add_solution(
    model: &ProblemModel,
    id: Option<Id>,
    leaf_id: &Id,
    label: impl Into<String>,
    share: f64,
) -> Result<ProblemModel, ModelError> {
    let leaf = model
        .obstacle(leaf_id.as_str())
        .ok_or_else(|| ModelError::UnknownNode(leaf_id.clone()))?;
    if !leaf.is_leaf {
        return Err(ModelError::NotALeaf(leaf_id.clone()));
    }
    let share = check_fraction(share, ModelError::ShareOutOfRange)?;
    let total: f64 = model.solutions_of(leaf_id.as_str()).map(|s| s.share).sum::<f64>() + share;
    if total > 1.0 + TOLERANCE {
        return Err(ModelError::ShareOverflow { target: leaf_id.clone(), total });
    }
    let taken = BTreeSet::new();
    let id = match id {
        Some(id) => claim_id(model, &taken, id)?,
        None => fresh_id(model, &taken, "s", model.solutions.len() + 1),
    };
    let mut next = model.clone();
    next.solutions.push(Solution {
        id,
        leaf_obstacle_id: leaf_id.clone(),
        label: label.into(),
        share,
        progress: 0.0,
        metrics: Vec::new(),
    });
    Ok(next)
}

pub fn register_resource(
    model: &ProblemModel,
    id: Option<Id>,
    name: impl Into<String>,
    kind: ResourceKind,
) -> Result<ProblemModel, ModelError> {
    let taken = BTreeSet::new();
    let id = match id {
        Some(id) => claim_id(model, &taken, id)?,
        None => fresh_id(model, &taken, "r", model.resources.len() + 1),
    };
    let mut next = model.clone();
    next.resources.push(Resource { id, name: name.into(), kind });
    Ok(next)
}

/// Several resources may cooperate on one solution; their shares sum to at most 1.
pub fn assign_resource(
    model: &ProblemModel,
    solution_id: &Id,
    resource_id: &Id,
    share: f64,
    spend: f64,
) -> Result<ProblemModel, ModelError> {
    if model.solution(solution_id.as_str()).is_none() {
        return Err(ModelError::UnknownSolution(solution_id.clone()));
    }
    if model.resource(resource_id.as_str()).is_none() {
        return Err(ModelError::UnknownResource(resource_id.clone()));
    }
    let share = check_fraction(share, ModelError::ShareOutOfRange)?;
    if !(spend.is_finite() && spend >= 0.0) {
        return Err(ModelError::InvalidSpend(spend));
    }
    if model
        .assignments_of(solution_id.as_str())
        .any(|a| a.resource_id == *resource_id)
    {
        return Err(ModelError::DuplicateAssignment {
            resource: resource_id.clone(),
            solution: solution_id.clone(),
        });
    }
    let total: f64 = model.assignments_of(solution_id.as_str()).map(|a| a.share).sum::<f64>() + share;
    if total > 1.0 + TOLERANCE {
        return Err(ModelError::ShareOverflow { target: solution_id.clone(), total });
    }
    let mut next = model.clone();
    next.assignments.push(ResourceAssignment {
        resource_id: resource_id.clone(),
        solution_id: solution_id.clone(),
        share,
        spend,
    });
    Ok(next)
}

/// Sets a solution's progress and upserts the given metrics by name.
pub fn report_progress(
    model: &ProblemModel,
    solution_id: &Id,
    progress: f64,
    metrics: &[Metric],
) -> Result<ProblemModel, ModelError> {
    if model.solution(solution_id.as_str()).is_none() {
        return Err(ModelError::UnknownSolution(solution_id.clone()));
    }
    if !(progress.is_finite() && (0.0..=1.0).contains(&progress)) {
        return Err(ModelError::ProgressOutOfRange(progress));
    }
    if let Some(bad) = metrics.iter().find(|m| !m.value.is_finite()) {
        return Err(ModelError::InvalidMetric(bad.name.clone()));
    }
    let mut next = model.clone();
    let solution = next
        .solutions
        .iter_mut()
        .find(|s| s.id == *solution_id)
        .expect("checked above");
    solution.progress = quantize(progress);
    for metric in metrics {
        match solution.metrics.iter_mut().find(|m| m.name == metric.name) {
            Some(existing) => *existing = metric.clone(),
            None => solution.metrics.push(metric.clone()),
        }
    }
    Ok(next)
}

/// Sets the cumulative spend of one assignment.
pub fn report_spend(model: &ProblemModel, resource_id: &Id, solution_id: &Id, spend: f64) -> Result<ProblemModel, ModelError> {
    if !(spend.is_finite() && spend >= 0.0) {
        return Err(ModelError::InvalidSpend(spend));
    }
    let mut next = model.clone();
    let assignment = next
        .assignments
        .iter_mut()
        .find(|a| a.resource_id == *resource_id && a.solution_id == *solution_id)
        .ok_or_else(|| ModelError::UnknownAssignment {
            resource: resource_id.clone(),
            solution: solution_id.clone(),
        })?;
    assignment.spend = spend;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> Id {
        Id::new(s).unwrap()
    }

    fn base() -> ProblemModel {
        ProblemModel::new(id("m"), "test")
    }

    fn with_top(labels: &[(&str, f64)]) -> ProblemModel {
        let parts: Vec<Part> = labels.iter().map(|(l, w)| Part::new(*l, *w)).collect();
        subdivide_obstacle(&base(), &Id::root(), &parts).unwrap()
    }

    #[test]
    fn sentence_counting() {
        assert_eq!(
            sentence_count("Make the innovation and start-up eco-system in our country renowned in the world, sustainably."),
            1
        );
        assert_eq!(sentence_count(""), 0);
        assert_eq!(sentence_count("A. B. C. D."), 4);
        assert_eq!(sentence_count("No terminator"), 1);
        assert_eq!(sentence_count("One. Two"), 2);
        assert_eq!(sentence_count("Really?! Yes."), 2);
        assert_eq!(sentence_count("   "), 0);
        assert_eq!(sentence_count("Version 2.0 ships. Done."), 2);
    }

    #[test]
    fn subdivide_unsafe_neighborhoods() {
        let m = with_top(&[("Unsafe neighborhoods", 1.0)]);
        let m2 = subdivide_obstacle(
            &m,
            &id("o1"),
            &[Part::new("Crime committed on the streets", 0.5), Part::new("Other", 0.5)],
        )
        .unwrap();
        let children: Vec<_> = m2.children_of("o1").map(|(o, w)| (o.id.to_string(), w)).collect();
        assert_eq!(children, vec![("o1-1".to_string(), 0.5), ("o1-2".to_string(), 0.5)]);
        assert!(!m2.obstacle("o1").unwrap().is_leaf);
        // original untouched
        assert_eq!(m.obstacles.len(), 1);
    }

    #[test]
    fn subdivide_single_child_and_bad_sum() {
        let m = with_top(&[("a", 1.0)]);
        let m2 = subdivide_obstacle(&m, &id("o1"), &[Part::new("only child", 1.0)]).unwrap();
        assert_eq!(m2.children_of("o1").map(|(_, w)| w).collect::<Vec<_>>(), vec![1.0]);
        let err = subdivide_obstacle(&m, &id("o1"), &[Part::new("x", 0.5), Part::new("y", 0.6)]).unwrap_err();
        assert!(matches!(err, ModelError::WeightSumViolation { .. }));
        assert_eq!(
            subdivide_obstacle(&m, &id("nope"), &[Part::new("x", 1.0)]).unwrap_err(),
            ModelError::UnknownNode(id("nope"))
        );
        assert_eq!(
            subdivide_obstacle(&m, &id("o1"), &[Part::new("x", 0.0), Part::new("y", 1.0)]).unwrap_err(),
            ModelError::WeightOutOfRange(0.0)
        );
    }

    #[test]
    fn subdivide_refuses_leaf_with_solutions() {
        let m = with_top(&[("a", 1.0)]);
        let m = mark_leaf(&m, &id("o1")).unwrap();
        let m = add_solution(&m, None, &id("o1"), "fix", 0.5).unwrap();
        assert_eq!(
            subdivide_obstacle(&m, &id("o1"), &[Part::new("x", 1.0)]).unwrap_err(),
            ModelError::HasSolutions(id("o1"))
        );
    }

    #[test]
    fn mark_leaf_rules() {
        let m = with_top(&[("Streets too dark at night", 0.5), ("b", 0.5)]);
        let m1 = mark_leaf(&m, &id("o1")).unwrap();
        assert!(m1.obstacle("o1").unwrap().is_leaf);
        assert_eq!(mark_leaf(&m1, &id("o1")).unwrap(), m1);
        let m2 = subdivide_obstacle(&m, &id("o2"), &[Part::new("x", 0.5), Part::new("y", 0.5)]).unwrap();
        assert_eq!(mark_leaf(&m2, &id("o2")).unwrap_err(), ModelError::HasChildren(id("o2")));
        assert_eq!(mark_leaf(&m2, &id("zz")).unwrap_err(), ModelError::UnknownNode(id("zz")));
    }

    #[test]
    fn solution_shares() {
        let m = mark_leaf(&with_top(&[("Streets too dark at night", 1.0)]), &id("o1")).unwrap();
        let mut four = m.clone();
        for label in [
            "Install new streetlamps",
            "Replace street lighting",
            "Fix street lighting",
            "Adjust switch times",
        ] {
            four = add_solution(&four, None, &id("o1"), label, 0.25).unwrap();
        }
        let total: f64 = four.solutions_of("o1").map(|s| s.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(four.solutions.iter().all(|s| s.progress == 0.0));

        assert!(add_solution(&m, None, &id("o1"), "all", 1.0).is_ok());
        let half = add_solution(&m, None, &id("o1"), "a", 0.5).unwrap();
        assert!(matches!(
            add_solution(&half, None, &id("o1"), "b", 0.6).unwrap_err(),
            ModelError::ShareOverflow { .. }
        ));

        let not_leaf = with_top(&[("x", 1.0)]);
        assert_eq!(
            add_solution(&not_leaf, None, &id("o1"), "s", 0.5).unwrap_err(),
            ModelError::NotALeaf(id("o1"))
        );
        assert_eq!(
            add_solution(&not_leaf, None, &id("q"), "s", 0.5).unwrap_err(),
            ModelError::UnknownNode(id("q"))
        );
    }

    #[test]
    fn cooperating_resources() {
        let m = mark_leaf(&with_top(&[("x", 1.0)]), &id("o1")).unwrap();
        let m = add_solution(&m, Some(id("s1-1")), &id("o1"), "s", 1.0).unwrap();
        let m = register_resource(&m, Some(id("r1-1-1")), "city", ResourceKind::Government).unwrap();
        let m = register_resource(&m, Some(id("r1-1-2")), "fund", ResourceKind::Philanthropy).unwrap();
        let a = assign_resource(&m, &id("s1-1"), &id("r1-1-1"), 0.25, 0.0).unwrap();
        let a = assign_resource(&a, &id("s1-1"), &id("r1-1-2"), 0.75, 0.0).unwrap();
        assert_eq!(a.assignments.len(), 2);
        assert!(matches!(
            assign_resource(&a, &id("s1-1"), &id("r1-1-1"), 0.1, 0.0).unwrap_err(),
            ModelError::DuplicateAssignment { .. }
        ));
        assert!(assign_resource(&m, &id("s1-1"), &id("r1-1-1"), 1.0, 10.0).is_ok());
        assert_eq!(
            assign_resource(&m, &id("nope"), &id("r1-1-1"), 1.0, 0.0).unwrap_err(),
            ModelError::UnknownSolution(id("nope"))
        );
        assert_eq!(
            assign_resource(&m, &id("s1-1"), &id("nope"), 1.0, 0.0).unwrap_err(),
            ModelError::UnknownResource(id("nope"))
        );
        let one = assign_resource(&m, &id("s1-1"), &id("r1-1-1"), 0.5, 0.0).unwrap();
        assert!(matches!(
            assign_resource(&one, &id("s1-1"), &id("r1-1-2"), 0.6, 0.0).unwrap_err(),
            ModelError::ShareOverflow { .. }
        ));
        assert_eq!(
            assign_resource(&m, &id("s1-1"), &id("r1-1-1"), 0.5, -1.0).unwrap_err(),
            ModelError::InvalidSpend(-1.0)
        );
    }

    #[test]
    fn add_obstacle_rescales_siblings() {
        let m = add_obstacle(&base(), None, "first", &[(Id::root(), 1.0)]).unwrap();
        let m = add_obstacle(&m, None, "second", &[(Id::root(), 0.25)]).unwrap();
        let weights: Vec<f64> = m.children_of(GOAL_ROOT).map(|(_, w)| w).collect();
        assert_eq!(weights, vec![0.75, 0.25]);
        assert!(matches!(
            add_obstacle(&base(), None, "x", &[(Id::root(), 0.5)]).unwrap_err(),
            ModelError::WeightSumViolation { .. }
        ));
        assert!(matches!(
            add_obstacle(&m, None, "x", &[(Id::root(), 1.0)]).unwrap_err(),
            ModelError::WeightSumViolation { .. }
        ));
        // multi-parent node
        let m = add_obstacle(&m, Some(id("shared")), "shared", &[(id("o1"), 1.0), (id("o2"), 1.0)]).unwrap();
        assert_eq!(m.obstacle("shared").unwrap().parents.len(), 2);
        assert!(validate(&m).is_empty());
        assert_eq!(
            add_obstacle(&m, Some(id("shared")), "dup", &[(Id::root(), 0.5)]).unwrap_err(),
            ModelError::DuplicateId(id("shared"))
        );
    }

    #[test]
    fn set_weights_requires_exact_child_set() {
        let m = with_top(&[("a", 0.5), ("b", 0.5)]);
        let m2 = set_weights(&m, &Id::root(), &[(id("o1"), 0.2), (id("o2"), 0.8)]).unwrap();
        assert_eq!(m2.children_of(GOAL_ROOT).map(|(_, w)| w).collect::<Vec<_>>(), vec![0.2, 0.8]);
        assert!(matches!(
            set_weights(&m, &Id::root(), &[(id("o1"), 1.0)]).unwrap_err(),
            ModelError::ChildSetMismatch { .. }
        ));
        assert!(matches!(
            set_weights(&m, &Id::root(), &[(id("o1"), 0.2), (id("o2"), 0.7)]).unwrap_err(),
            ModelError::WeightSumViolation { .. }
        ));
    }

    #[test]
    fn goal_agreement_needs_full_roster() {
        let mut m = base();
        for s in ["a", "b"] {
            m = register_stakeholder(&m, Stakeholder { id: id(s), name: s.into(), constituency: "c".into() }).unwrap();
        }
        assert_eq!(agree_goal(&m, &[id("a"), id("b")]).unwrap_err(), ModelError::NoDraft);
        let m = draft_goal(&m, GoalText { text: "One goal.".into(), ..Default::default() }).unwrap();
        assert!(matches!(agree_goal(&m, &[id("a")]).unwrap_err(), ModelError::RosterMismatch { .. }));
        assert!(matches!(
            agree_goal(&m, &[id("a"), id("b"), id("a")]).unwrap_err(),
            ModelError::RosterMismatch { .. }
        ));
        let agreed = agree_goal(&m, &[id("b"), id("a")]).unwrap();
        assert_eq!(agreed.goal.status, GoalStatus::Agreed);

        let long = edit_goal(&m, GoalText { text: "A. B. C. D.".into(), ..Default::default() }).unwrap();
        assert_eq!(agree_goal(&long, &[id("a"), id("b")]).unwrap_err(), ModelError::SentenceCount(4));
        let overridden = edit_goal(
            &m,
            GoalText { text: "A. B. C. D.".into(), sentence_count_override: Some(2), ..Default::default() },
        )
        .unwrap();
        assert!(agree_goal(&overridden, &[id("a"), id("b")]).is_ok());

        // late registration reopens agreement
        let joined =
            register_stakeholder(&agreed, Stakeholder { id: id("c"), name: "c".into(), constituency: "".into() }).unwrap();
        assert_eq!(joined.goal.status, GoalStatus::Draft);
        assert!(validate(&joined).is_empty());
    }

    #[test]
    fn progress_and_spend_reports() {
        let m = mark_leaf(&with_top(&[("x", 1.0)]), &id("o1")).unwrap();
        let m = add_solution(&m, None, &id("o1"), "s", 1.0).unwrap();
        let m = register_resource(&m, None, "r", ResourceKind::Citizen).unwrap();
        let m = assign_resource(&m, &id("s1"), &id("r1"), 1.0, 0.0).unwrap();
        let metric = Metric { name: "lamps".into(), value: 12.0, unit: "count".into() };
        let m = report_progress(&m, &id("s1"), 0.5, std::slice::from_ref(&metric)).unwrap();
        let m = report_progress(&m, &id("s1"), 0.6, &[Metric { value: 14.0, ..metric }]).unwrap();
        let s = m.solution("s1").unwrap();
        assert_eq!(s.progress, 0.6);
        assert_eq!(s.metrics.len(), 1);
        assert_eq!(s.metrics[0].value, 14.0);
        assert_eq!(report_progress(&m, &id("s1"), 1.5, &[]).unwrap_err(), ModelError::ProgressOutOfRange(1.5));
        let m = report_spend(&m, &id("r1"), &id("s1"), 1000.0).unwrap();
        assert_eq!(m.assignments[0].spend, 1000.0);
        assert!(matches!(
            report_spend(&m, &id("r1"), &id("zz"), 1.0).unwrap_err(),
            ModelError::UnknownAssignment { .. }
        ));
    }
}
