//! Random valid models built directly (not through the guarded operations),
//! so the analytics can be checked against shapes the operations would
//! never produce in a single session.

use std::collections::BTreeSet;

use psm_core::model::{
    Id, ObstacleNode, ParentLink, ProblemModel, Resource, ResourceAssignment, ResourceKind, Solution, GOAL_ROOT,
};
use rand::Rng as _;

use crate::Rng;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_depth: usize,
    pub max_fanout: usize,
    pub max_nodes: usize,
    /// Chance that a node below the first ring gains a second parent.
    pub extra_parent: f64,
    pub expand: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_depth: 5, max_fanout: 6, max_nodes: 60, extra_parent: 0.2, expand: 0.55 }
    }
}

/// Positive fractions summing to one.
pub fn partition(rng: &mut Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Positive fractions summing to `total` or less.
pub fn sub_partition(rng: &mut Rng, k: usize, total: f64) -> Vec<f64> {
    partition(rng, k).into_iter().map(|x| x * total).collect()
}

/// Obstacle DAG only; every terminal obstacle is marked leaf.
pub fn random_dag(rng: &mut Rng, shape: Shape) -> ProblemModel {
    let mut model = ProblemModel::new(Id::unchecked("random"), "random");
    model.goal.text = "Reach the goal.".into();
    // (node index, depth); children lists are indices into `nodes`.
    let mut depth_of: Vec<usize> = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new(); // slot 0 is the root
    children.push(Vec::new());
    let mut frontier = vec![0usize]; // slots: 0 = root, i + 1 = obstacle i

    for depth in 1..=shape.max_depth {
        let mut next = Vec::new();
        for &slot in &frontier {
            let expand = slot == 0 || rng.random_bool(shape.expand);
            if !expand || model.obstacles.len() >= shape.max_nodes {
                continue;
            }
            let room = shape.max_nodes - model.obstacles.len();
            let k = rng.random_range(1..=shape.max_fanout).min(room);
            for _ in 0..k {
                let i = model.obstacles.len();
                let parent = if slot == 0 { Id::root() } else { model.obstacles[slot - 1].id.clone() };
                model.obstacles.push(ObstacleNode {
                    id: Id::unchecked(format!("n{i}")),
                    label: format!("node {i}"),
                    parents: vec![ParentLink { parent, weight: 0.0 }],
                    is_leaf: false,
                });
                depth_of.push(depth);
                children.push(Vec::new());
                children[slot].push(i + 1);
                next.push(i + 1);
            }
        }
        frontier = next;
    }

    // Extra parents come from strictly shallower non-terminal nodes.
    for i in 0..model.obstacles.len() {
        if depth_of[i] < 2 || !rng.random_bool(shape.extra_parent) {
            continue;
        }
        let existing: BTreeSet<String> =
            model.obstacles[i].parents.iter().map(|l| l.parent.as_str().to_string()).collect();
        let candidates: Vec<usize> = (0..=model.obstacles.len())
            .filter(|&slot| {
                let shallower = slot == 0 || depth_of[slot - 1] < depth_of[i];
                let name = if slot == 0 { GOAL_ROOT.to_string() } else { format!("n{}", slot - 1) };
                shallower
                    && !children[slot].is_empty()
                    && children[slot].len() < shape.max_fanout
                    && !existing.contains(&name)
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let slot = candidates[rng.random_range(0..candidates.len())];
        let parent = if slot == 0 { Id::root() } else { model.obstacles[slot - 1].id.clone() };
        model.obstacles[i].parents.push(ParentLink { parent, weight: 0.0 });
        children[slot].push(i + 1);
    }

    for (slot, kids) in children.iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let parent = if slot == 0 { GOAL_ROOT.to_string() } else { format!("n{}", slot - 1) };
        for (&kid, w) in kids.iter().zip(partition(rng, kids.len())) {
            let link = model.obstacles[kid - 1]
                .parents
                .iter_mut()
                .find(|l| l.parent == parent.as_str())
                .expect("link recorded above");
            link.weight = w;
        }
    }
    for (obstacle, kids) in model.obstacles.iter_mut().zip(&children[1..]) {
        obstacle.is_leaf = kids.is_empty();
    }
    model
}

/// Replaces every sibling weight set with multiples of 1/64 that still sum
/// to one. Path products then stay exact in binary floating point, so any
/// summation order gives the same bits.
pub fn make_dyadic(rng: &mut Rng, model: &mut ProblemModel) {
    let mut parents: Vec<String> = vec![GOAL_ROOT.to_string()];
    parents.extend(model.obstacles.iter().map(|o| o.id.as_str().to_string()));
    for parent in parents {
        let slots: Vec<(usize, usize)> = model
            .obstacles
            .iter()
            .enumerate()
            .flat_map(|(i, o)| o.parents.iter().enumerate().filter(|(_, l)| l.parent == parent.as_str()).map(move |(j, _)| (i, j)))
            .collect();
        if slots.is_empty() {
            continue;
        }
        let mut units = vec![1u32; slots.len()];
        for _ in slots.len()..64 {
            units[rng.random_range(0..slots.len())] += 1;
        }
        for ((i, j), u) in slots.into_iter().zip(units) {
            model.obstacles[i].parents[j].weight = f64::from(u) / 64.0;
        }
    }
}

/// DAG plus solutions, resources, assignments, progress and spend.
pub fn random_model(rng: &mut Rng, shape: Shape) -> ProblemModel {
    let mut model = random_dag(rng, shape);
    let leaves: Vec<Id> = model.obstacles.iter().filter(|o| o.is_leaf).map(|o| o.id.clone()).collect();
    for leaf in leaves {
        let k = rng.random_range(1..=3);
        let covered = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.2..1.0) };
        for share in sub_partition(rng, k, covered) {
            let n = model.solutions.len();
            let progress = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..=1.0) };
            model.solutions.push(Solution {
                id: Id::unchecked(format!("s{n}")),
                leaf_obstacle_id: leaf.clone(),
                label: format!("solution {n}"),
                share,
                progress,
                metrics: vec![],
            });
        }
    }
    let resource_count = rng.random_range(1..=5);
    for r in 0..resource_count {
        model.resources.push(Resource {
            id: Id::unchecked(format!("r{r}")),
            name: format!("resource {r}"),
            kind: ResourceKind::Other,
        });
    }
    let solution_ids: Vec<Id> = model.solutions.iter().map(|s| s.id.clone()).collect();
    for sid in solution_ids {
        if !rng.random_bool(0.7) {
            continue;
        }
        let k = rng.random_range(1..=resource_count.min(3));
        let mut picked: Vec<usize> = (0..resource_count).collect();
        for i in 0..k {
            let j = rng.random_range(i..resource_count);
            picked.swap(i, j);
        }
        let covered = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.2..1.0) };
        for (&r, share) in picked[..k].iter().zip(sub_partition(rng, k, covered)) {
            let spend = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(1.0..10_000.0) };
            model.assignments.push(ResourceAssignment {
                resource_id: Id::unchecked(format!("r{r}")),
                solution_id: sid.clone(),
                share,
                spend,
            });
        }
    }
    model
}
