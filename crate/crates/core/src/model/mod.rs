//! Domain types for the radial problem-solving model.
//!
//! A model is a superordinate goal at the root, an obstacle DAG whose edges
//! carry sibling-normalized weights, solutions hanging off leaf obstacles,
//! and resources assigned to solutions. Everything here is a plain value:
//! operations in [`ops`] take a snapshot and return a new one.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub mod ops;
mod validate;

pub use ops::*;
pub use validate::{validate, Violation, ViolationKind};

/// Reserved identifier of the goal disk at the center of the model.
pub const GOAL_ROOT: &str = "goal";

/// Tolerance applied to every weight and share sum.
pub const TOLERANCE: f64 = 1e-9;

/// Identifier of a model entity or stakeholder.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(String);

impl Id {
    pub fn new(raw: impl Into<String>) -> Result<Self, ModelError> {
        let raw = raw.into();
        if Self::is_well_formed(&raw) {
            Ok(Id(raw))
        } else {
            Err(ModelError::InvalidId(raw))
        }
    }

    /// Wraps a string without checking it. Used for ids generated internally
    /// and in tests that build invalid models on purpose.
    pub fn unchecked(raw: impl Into<String>) -> Self {
        Id(raw.into())
    }

    pub fn root() -> Self {
        Id(GOAL_ROOT.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0 == GOAL_ROOT
    }

    /// Ids are 1..=128 chars of `[A-Za-z0-9_.:-]`; `/` is reserved for layout paths.
    pub fn is_well_formed(raw: &str) -> bool {
        !raw.is_empty()
            && raw.len() <= 128
            && raw
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b':' | b'-'))
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for Id {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Id {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Id {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Id {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GoalStatus {
    Draft,
    Agreed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SuperordinateGoal {
    pub text: String,
    /// Free-form description of the initial system state.
    pub current_state_description: String,
    pub status: GoalStatus,
    pub agreed_by: Vec<Id>,
    /// Facilitator annotation that replaces the terminator-based sentence count.
    #[serde(default)]
    pub sentence_count_override: Option<u32>,
}

impl SuperordinateGoal {
    pub fn draft() -> Self {
        SuperordinateGoal {
            text: String::new(),
            current_state_description: String::new(),
            status: GoalStatus::Draft,
            agreed_by: Vec::new(),
            sentence_count_override: None,
        }
    }

    pub fn effective_sentence_count(&self) -> usize {
        match self.sentence_count_override {
            Some(n) => n as usize,
            None => ops::sentence_count(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParentLink {
    pub parent: Id,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObstacleNode {
    pub id: Id,
    pub label: String,
    pub parents: Vec<ParentLink>,
    pub is_leaf: bool,
}

impl ObstacleNode {
    pub fn weight_under(&self, parent: &str) -> Option<f64> {
        self.parents
            .iter()
            .find(|link| link.parent == parent)
            .map(|link| link.weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Solution {
    pub id: Id,
    pub leaf_obstacle_id: Id,
    pub label: String,
    pub share: f64,
    pub progress: f64,
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResourceKind {
    Government,
    Philanthropy,
    Academia,
    Corporate,
    Citizen,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Resource {
    pub id: Id,
    pub name: String,
    pub kind: ResourceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ResourceAssignment {
    pub resource_id: Id,
    pub solution_id: Id,
    pub share: f64,
    /// Cumulative spend in currency units.
    pub spend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Stakeholder {
    pub id: Id,
    pub name: String,
    pub constituency: String,
}

/// Snapshot of goal, obstacle hierarchy, solutions, resources and progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProblemModel {
    pub id: Id,
    pub title: String,
    pub goal: SuperordinateGoal,
    pub obstacles: Vec<ObstacleNode>,
    pub solutions: Vec<Solution>,
    pub resources: Vec<Resource>,
    pub assignments: Vec<ResourceAssignment>,
    pub stakeholders: Vec<Stakeholder>,
}

impl ProblemModel {
    pub fn new(id: Id, title: impl Into<String>) -> Self {
        ProblemModel {
            id,
            title: title.into(),
            goal: SuperordinateGoal::draft(),
            obstacles: Vec::new(),
            solutions: Vec::new(),
            resources: Vec::new(),
            assignments: Vec::new(),
            stakeholders: Vec::new(),
        }
    }

    pub fn obstacle(&self, id: &str) -> Option<&ObstacleNode> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    pub fn solution(&self, id: &str) -> Option<&Solution> {
        self.solutions.iter().find(|s| s.id == id)
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    /// Children of `parent` (an obstacle id or [`GOAL_ROOT`]) in insertion
    /// order, with their weight under that parent.
    pub fn children_of<'a>(&'a self, parent: &'a str) -> impl Iterator<Item = (&'a ObstacleNode, f64)> + 'a {
        self.obstacles
            .iter()
            .filter_map(move |o| o.weight_under(parent).map(|w| (o, w)))
    }

    pub fn has_children(&self, id: &str) -> bool {
        self.children_of(id).next().is_some()
    }

    pub fn solutions_of<'a>(&'a self, leaf: &'a str) -> impl Iterator<Item = &'a Solution> + 'a {
        self.solutions.iter().filter(move |s| s.leaf_obstacle_id == leaf)
    }

    pub fn assignments_of<'a>(&'a self, solution: &'a str) -> impl Iterator<Item = &'a ResourceAssignment> + 'a {
        self.assignments.iter().filter(move |a| a.solution_id == solution)
    }

    /// Obstacles without children, in insertion order.
    pub fn terminal_obstacles(&self) -> Vec<&ObstacleNode> {
        let index = self.child_index();
        self.obstacles
            .iter()
            .filter(|o| !index.contains_key(o.id.as_str()))
            .collect()
    }

    /// parent id -> [(child index into `obstacles`, weight)] in insertion order.
    pub fn child_index(&self) -> BTreeMap<&str, Vec<(usize, f64)>> {
        let mut index: BTreeMap<&str, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, node) in self.obstacles.iter().enumerate() {
            for link in &node.parents {
                index.entry(link.parent.as_str()).or_default().push((i, link.weight));
            }
        }
        index
    }

    /// Obstacle indices in an order where every node follows all of its
    /// parents, or `None` when the obstacle graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let position: BTreeMap<&str, usize> = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id.as_str(), i))
            .collect();
        let mut pending: Vec<usize> = self
            .obstacles
            .iter()
            .map(|o| {
                o.parents
                    .iter()
                    .filter(|l| position.contains_key(l.parent.as_str()))
                    .count()
            })
            .collect();
        let index = self.child_index();
        let mut queue: Vec<usize> = (0..self.obstacles.len()).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(self.obstacles.len());
        let mut head = 0;
        while head < queue.len() {
            let i = queue[head];
            head += 1;
            order.push(i);
            if let Some(children) = index.get(self.obstacles[i].id.as_str()) {
                for &(c, _) in children {
                    pending[c] -= 1;
                    if pending[c] == 0 {
                        queue.push(c);
                    }
                }
            }
        }
        (order.len() == self.obstacles.len()).then_some(order)
    }

    /// True when `id` names any obstacle, solution, resource, or the goal root.
    pub fn entity_id_in_use(&self, id: &str) -> bool {
        id == GOAL_ROOT
            || self.obstacle(id).is_some()
            || self.solution(id).is_some()
            || self.resource(id).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown obstacle `{0}`")]
    UnknownNode(Id),
    #[error("unknown solution `{0}`")]
    UnknownSolution(Id),
    #[error("unknown resource `{0}`")]
    UnknownResource(Id),
    #[error("unknown stakeholder `{0}`")]
    UnknownStakeholder(Id),
    #[error("obstacle `{0}` already carries solutions")]
    HasSolutions(Id),
    #[error("obstacle `{0}` has children")]
    HasChildren(Id),
    #[error("obstacle `{0}` is not a leaf")]
    NotALeaf(Id),
    #[error("weights under `{parent}` sum to {sum}, expected 1")]
    WeightSumViolation { parent: Id, sum: f64 },
    #[error("weight {0} outside (0, 1]")]
    WeightOutOfRange(f64),
    #[error("share {0} outside (0, 1]")]
    ShareOutOfRange(f64),
    #[error("shares on `{target}` would sum to {total}, above 1")]
    ShareOverflow { target: Id, total: f64 },
    #[error("progress {0} outside [0, 1]")]
    ProgressOutOfRange(f64),
    #[error("spend {0} must be finite and non-negative")]
    InvalidSpend(f64),
    #[error("metric `{0}` has a non-finite value")]
    InvalidMetric(String),
    #[error("resource `{resource}` is already assigned to solution `{solution}`")]
    DuplicateAssignment { resource: Id, solution: Id },
    #[error("no assignment of resource `{resource}` to solution `{solution}`")]
    UnknownAssignment { resource: Id, solution: Id },
    #[error("id `{0}` is already in use")]
    DuplicateId(Id),
    #[error("malformed id `{0}`")]
    InvalidId(String),
    #[error("`{0}` listed twice as a parent")]
    DuplicateParent(Id),
    #[error("no parts or parents given")]
    Empty,
    #[error("weights for `{parent}` must name exactly its current children")]
    ChildSetMismatch { parent: Id },
    #[error("goal already has a draft; edit it instead")]
    GoalAlreadyDrafted,
    #[error("goal has no draft to edit")]
    NoDraft,
    #[error("goal text has {0} sentences; between 1 and 3 are required")]
    SentenceCount(usize),
    #[error("agreement roster does not match registered stakeholders (missing {missing:?}, unexpected {unexpected:?})")]
    RosterMismatch { missing: Vec<Id>, unexpected: Vec<Id> },
    #[error("no stakeholders are registered")]
    NoStakeholders,
}

impl ModelError {
    /// Stable machine code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::UnknownNode(_) => "UNKNOWN_NODE",
            ModelError::UnknownSolution(_) => "UNKNOWN_SOLUTION",
            ModelError::UnknownResource(_) => "UNKNOWN_RESOURCE",
            ModelError::UnknownStakeholder(_) => "UNKNOWN_STAKEHOLDER",
            ModelError::HasSolutions(_) => "HAS_SOLUTIONS",
            ModelError::HasChildren(_) => "HAS_CHILDREN",
            ModelError::NotALeaf(_) => "NOT_A_LEAF",
            ModelError::WeightSumViolation { .. } => "WEIGHT_SUM_VIOLATION",
            ModelError::WeightOutOfRange(_) => "WEIGHT_OUT_OF_RANGE",
            ModelError::ShareOutOfRange(_) => "SHARE_OUT_OF_RANGE",
            ModelError::ShareOverflow { .. } => "SHARE_OVERFLOW",
            ModelError::ProgressOutOfRange(_) => "PROGRESS_OUT_OF_RANGE",
            ModelError::InvalidSpend(_) => "INVALID_SPEND",
            ModelError::InvalidMetric(_) => "INVALID_METRIC",
            ModelError::DuplicateAssignment { .. } => "DUPLICATE_ASSIGNMENT",
            ModelError::UnknownAssignment { .. } => "UNKNOWN_ASSIGNMENT",
            ModelError::DuplicateId(_) => "DUPLICATE_ID",
            ModelError::InvalidId(_) => "INVALID_ID",
            ModelError::DuplicateParent(_) => "DUPLICATE_PARENT",
            ModelError::Empty => "EMPTY",
            ModelError::ChildSetMismatch { .. } => "CHILD_SET_MISMATCH",
            ModelError::GoalAlreadyDrafted => "GOAL_ALREADY_DRAFTED",
            ModelError::NoDraft => "NO_DRAFT",
            ModelError::SentenceCount(_) => "SENTENCE_COUNT",
            ModelError::RosterMismatch { .. } => "ROSTER_MISMATCH",
            ModelError::NoStakeholders => "NO_STAKEHOLDERS",
        }
    }
}
