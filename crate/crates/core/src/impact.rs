//! Goal-impact factors, progress rollup and sROI.
//!
//! The impact of an obstacle is the sum, over every path from the goal root,
//! of the product of edge weights along the path. Weights under each parent
//! sum to one, so impacts over childless obstacles sum to one as well.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::model::{Id, ModelError, ProblemModel, GOAL_ROOT};

/// Impact of every obstacle, keyed by id. The goal root has impact 1.
pub fn impact_factors(model: &ProblemModel) -> BTreeMap<Id, f64> {
    let order = model
        .topological_order()
        .expect("impact analysis needs an acyclic obstacle graph");
    let mut by_index = vec![0.0; model.obstacles.len()];
    let position: BTreeMap<&str, usize> =
        model.obstacles.iter().enumerate().map(|(i, o)| (o.id.as_str(), i)).collect();
    for i in order {
        by_index[i] = model.obstacles[i]
            .parents
            .iter()
            .map(|link| {
                let parent = if link.parent == GOAL_ROOT {
                    1.0
                } else {
                    position.get(link.parent.as_str()).map_or(0.0, |&p| by_index[p])
                };
                parent * link.weight
            })
            .fold(0.0, |acc, x| acc + x);
    }
    model
        .obstacles
        .iter()
        .zip(by_index)
        .map(|(o, impact)| (o.id.clone(), impact))
        .collect()
}

/// Partial impact of one obstacle (or the goal root) on the goal.
pub fn goal_impact(model: &ProblemModel, node_id: &str) -> Result<f64, ModelError> {
    if node_id == GOAL_ROOT {
        return Ok(1.0);
    }
    if model.obstacle(node_id).is_none() {
        return Err(ModelError::UnknownNode(Id::unchecked(node_id)));
    }
    Ok(impact_factors(model)[node_id])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactReport {
    /// Goal impact of each obstacle.
    pub per_node: BTreeMap<Id, f64>,
    /// Goal impact of each solution: its leaf's impact times its share.
    pub per_solution: BTreeMap<Id, f64>,
    /// Progress of each obstacle: weighted sum of its children, or for a
    /// childless obstacle the share-weighted progress of its solutions.
    pub node_progress: BTreeMap<Id, f64>,
    pub goal_progress: f64,
}

/// Rolls solution progress up to the goal.
pub fn progress_rollup(model: &ProblemModel) -> ImpactReport {
    let per_node = impact_factors(model);
    let per_solution = model
        .solutions
        .iter()
        .map(|s| (s.id.clone(), per_node.get(&s.leaf_obstacle_id).copied().unwrap_or(0.0) * s.share))
        .collect();

    let index = model.child_index();
    let order = model.topological_order().expect("checked by impact_factors");
    let mut progress = vec![0.0; model.obstacles.len()];
    for &i in order.iter().rev() {
        let node = &model.obstacles[i];
        progress[i] = match index.get(node.id.as_str()) {
            Some(children) => children.iter().map(|&(c, w)| w * progress[c]).fold(0.0, |acc, x| acc + x),
            None => model.solutions_of(node.id.as_str()).map(|s| s.share * s.progress).fold(0.0, |acc, x| acc + x),
        };
    }
    let goal_progress = index
        .get(GOAL_ROOT)
        .map_or(0.0, |children| children.iter().map(|&(c, w)| w * progress[c]).fold(0.0, |acc, x| acc + x));
    let node_progress = model
        .obstacles
        .iter()
        .zip(progress)
        .map(|(o, p)| (o.id.clone(), p))
        .collect();

    ImpactReport { per_node, per_solution, node_progress, goal_progress }
}

/// A ratio that is undefined when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    Undefined,
}

impl Ratio {
    pub fn of(numerator: f64, denominator: f64) -> Ratio {
        if denominator > 0.0 {
            Ratio::Defined(numerator / denominator)
        } else {
            Ratio::Undefined
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Defined(v) => serializer.serialize_f64(*v),
            Ratio::Undefined => serializer.serialize_str("UNDEFINED"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SroiEntry {
    /// Goal fraction attributed to this entity.
    pub needle_movement: f64,
    pub spend: f64,
    /// Goal fraction per currency unit.
    pub sroi: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SroiReport {
    pub per_solution: BTreeMap<Id, SroiEntry>,
    pub per_resource: BTreeMap<Id, SroiEntry>,
}

/// Needle movement and sROI per solution and per resource. A resource is
/// credited with each assigned solution's movement in proportion to its
/// assignment share.
pub fn sroi(model: &ProblemModel) -> SroiReport {
    let impacts = impact_factors(model);
    let mut per_solution = BTreeMap::new();
    let mut movement_by_solution = BTreeMap::new();
    for s in &model.solutions {
        let needle = impacts.get(&s.leaf_obstacle_id).copied().unwrap_or(0.0) * s.share * s.progress;
        let spend: f64 = model.assignments_of(s.id.as_str()).map(|a| a.spend).fold(0.0, |acc, x| acc + x);
        movement_by_solution.insert(s.id.as_str(), needle);
        per_solution.insert(
            s.id.clone(),
            SroiEntry { needle_movement: needle, spend, sroi: Ratio::of(needle, spend) },
        );
    }

    let mut per_resource = BTreeMap::new();
    for r in &model.resources {
        let (needle, spend) = model
            .assignments
            .iter()
            .filter(|a| a.resource_id == r.id)
            .fold((0.0, 0.0), |(n, sp), a| {
                let moved = movement_by_solution.get(a.solution_id.as_str()).copied().unwrap_or(0.0);
                (n + moved * a.share, sp + a.spend)
            });
        per_resource.insert(
            r.id.clone(),
            SroiEntry { needle_movement: needle, spend, sroi: Ratio::of(needle, spend) },
        );
    }
    SroiReport { per_solution, per_resource }
}
