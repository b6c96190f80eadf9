//! Brute-force recomputations that share no code with the engine.

use std::collections::BTreeMap;

use psm_core::model::{ProblemModel, GOAL_ROOT};

fn child_lists(model: &ProblemModel) -> BTreeMap<String, Vec<(String, f64)>> {
    let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for o in &model.obstacles {
        for link in &o.parents {
            out.entry(link.parent.as_str().to_string()).or_default().push((o.id.as_str().to_string(), link.weight));
        }
    }
    out
}

/// Goal impact of every obstacle by walking every root path and summing
/// the weight products (multiplied outward from the root).
pub fn path_impacts(model: &ProblemModel) -> BTreeMap<String, f64> {
    let children = child_lists(model);
    let mut acc: BTreeMap<String, f64> = model.obstacles.iter().map(|o| (o.id.as_str().to_string(), 0.0)).collect();
    let mut stack = vec![(GOAL_ROOT.to_string(), 1.0f64)];
    while let Some((node, product)) = stack.pop() {
        if let Some(kids) = children.get(&node) {
            for (kid, w) in kids {
                let p = product * w;
                *acc.get_mut(kid).expect("kid is an obstacle") += p;
                stack.push((kid.clone(), p));
            }
        }
    }
    acc
}

/// Number of distinct root-to-node paths, summed over all obstacles.
pub fn path_count(model: &ProblemModel) -> usize {
    let children = child_lists(model);
    let mut count = 0;
    let mut stack = vec![GOAL_ROOT.to_string()];
    while let Some(node) = stack.pop() {
        if let Some(kids) = children.get(&node) {
            for (kid, _) in kids {
                count += 1;
                stack.push(kid.clone());
            }
        }
    }
    count
}

/// Terminal obstacles: those nobody names as a parent.
pub fn terminal_ids(model: &ProblemModel) -> Vec<String> {
    let children = child_lists(model);
    model
        .obstacles
        .iter()
        .map(|o| o.id.as_str().to_string())
        .filter(|id| !children.contains_key(id))
        .collect()
}

/// Needle movement and total spend per solution.
pub fn solution_needles(model: &ProblemModel) -> BTreeMap<String, (f64, f64)> {
    let impacts = path_impacts(model);
    model
        .solutions
        .iter()
        .map(|s| {
            let needle = impacts[s.leaf_obstacle_id.as_str()] * s.share * s.progress;
            let spend = model
                .assignments
                .iter()
                .filter(|a| a.solution_id == s.id)
                .map(|a| a.spend)
                .sum::<f64>();
            (s.id.as_str().to_string(), (needle, spend))
        })
        .collect()
}

/// Needle movement and total spend per resource.
pub fn resource_needles(model: &ProblemModel) -> BTreeMap<String, (f64, f64)> {
    let solutions = solution_needles(model);
    let mut out: BTreeMap<String, (f64, f64)> =
        model.resources.iter().map(|r| (r.id.as_str().to_string(), (0.0, 0.0))).collect();
    for a in &model.assignments {
        let entry = out.get_mut(a.resource_id.as_str()).expect("assigned resource exists");
        entry.0 += solutions[a.solution_id.as_str()].0 * a.share;
        entry.1 += a.spend;
    }
    out
}

/// Goal progress summed leaf by leaf over root paths.
pub fn goal_progress(model: &ProblemModel) -> f64 {
    let impacts = path_impacts(model);
    terminal_ids(model)
        .iter()
        .map(|leaf| {
            let local: f64 = model
                .solutions
                .iter()
                .filter(|s| s.leaf_obstacle_id.as_str() == leaf)
                .map(|s| s.share * s.progress)
                .sum();
            impacts[leaf] * local
        })
        .sum()
}
