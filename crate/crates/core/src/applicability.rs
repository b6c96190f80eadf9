//! Applicability envelope: per-stakeholder goal congruence and the
//! complexity gate over the dependency network of leaves, solutions and
//! resources.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize, Serializer};

use crate::model::{Id, ProblemModel};

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_H_CRIT: f64 = 0.25;

/// Elicited magnitudes for one stakeholder's decomposition of their own goal
/// state into the shared goal, a congruent surplus, an incongruent remainder
/// and goal components refactored into obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongruenceRecord {
    #[serde(rename = "stakeholderId")]
    pub stakeholder_id: Id,
    /// Perceived magnitude of the shared goal.
    #[serde(rename = "mS")]
    pub m_s: f64,
    /// Congruent surplus.
    #[serde(rename = "mC")]
    pub m_c: f64,
    /// Incongruent remainder.
    #[serde(rename = "mCbar")]
    pub m_cbar: f64,
    #[serde(rename = "refactoredObstacleIds", default)]
    pub refactored_obstacle_ids: Vec<Id>,
    /// Magnitude of each refactored obstacle, parallel to `refactored_obstacle_ids`.
    #[serde(rename = "mObar", default)]
    pub m_obar: Vec<f64>,
    /// Total magnitude of the stakeholder's original goal state, if elicited.
    #[serde(rename = "mI", default)]
    pub m_i: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CongruenceError {
    #[error("mS must be positive, got {0}")]
    NonPositiveMS(f64),
    #[error("mI must be positive when supplied, got {0}")]
    NonPositiveMI(f64),
    #[error("magnitude `{field}` must be finite and non-negative, got {value}")]
    NegativeMagnitude { field: String, value: f64 },
    #[error("{ids} refactored obstacles but {magnitudes} magnitudes")]
    LengthMismatch { ids: usize, magnitudes: usize },
    #[error("refactored obstacle `{0}` does not exist")]
    UnknownObstacle(Id),
    #[error("stakeholder `{0}` is not registered")]
    UnknownStakeholder(Id),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
}

impl CongruenceError {
    pub fn code(&self) -> &'static str {
        match self {
            CongruenceError::NonPositiveMS(_) => "NON_POSITIVE_MS",
            CongruenceError::NonPositiveMI(_) => "NON_POSITIVE_MI",
            CongruenceError::NegativeMagnitude { .. } => "NEGATIVE_MAGNITUDE",
            CongruenceError::LengthMismatch { .. } => "LENGTH_MISMATCH",
            CongruenceError::UnknownObstacle(_) => "UNKNOWN_OBSTACLE",
            CongruenceError::UnknownStakeholder(_) => "UNKNOWN_STAKEHOLDER",
            CongruenceError::InvalidEpsilon(_) => "INVALID_EPSILON",
        }
    }
}

impl CongruenceRecord {
    /// Checks magnitudes in isolation.
    pub fn check_magnitudes(&self) -> Result<(), CongruenceError> {
        if !(self.m_s.is_finite() && self.m_s > 0.0) {
            return Err(CongruenceError::NonPositiveMS(self.m_s));
        }
        let scalars = [("mC", self.m_c), ("mCbar", self.m_cbar)];
        for (field, value) in scalars {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CongruenceError::NegativeMagnitude { field: field.into(), value });
            }
        }
        for (i, value) in self.m_obar.iter().enumerate() {
            if !(value.is_finite() && *value >= 0.0) {
                return Err(CongruenceError::NegativeMagnitude { field: format!("mObar[{i}]"), value: *value });
            }
        }
        if self.m_obar.len() != self.refactored_obstacle_ids.len() {
            return Err(CongruenceError::LengthMismatch {
                ids: self.refactored_obstacle_ids.len(),
                magnitudes: self.m_obar.len(),
            });
        }
        if let Some(m_i) = self.m_i {
            if !(m_i.is_finite() && m_i > 0.0) {
                return Err(CongruenceError::NonPositiveMI(m_i));
            }
        }
        Ok(())
    }

    /// Checks magnitudes plus references into the model.
    pub fn check_against(&self, model: &ProblemModel) -> Result<(), CongruenceError> {
        self.check_magnitudes()?;
        if !model.stakeholders.iter().any(|s| s.id == self.stakeholder_id) {
            return Err(CongruenceError::UnknownStakeholder(self.stakeholder_id.clone()));
        }
        if let Some(missing) = self
            .refactored_obstacle_ids
            .iter()
            .find(|id| model.obstacle(id.as_str()).is_none())
        {
            return Err(CongruenceError::UnknownObstacle(missing.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CongruenceCheck {
    pub congruent: bool,
    pub ratio_c: f64,
    pub ratio_cbar: f64,
}

/// Both surplus ratios must stay at or below `epsilon`.
pub fn check_congruence(record: &CongruenceRecord, epsilon: f64) -> Result<CongruenceCheck, CongruenceError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CongruenceError::InvalidEpsilon(epsilon));
    }
    if !(record.m_s.is_finite() && record.m_s > 0.0) {
        return Err(CongruenceError::NonPositiveMS(record.m_s));
    }
    let ratio_c = record.m_c / record.m_s;
    let ratio_cbar = record.m_cbar / record.m_s;
    Ok(CongruenceCheck {
        congruent: ratio_c <= epsilon && ratio_cbar <= epsilon,
        ratio_c,
        ratio_cbar,
    })
}

/// `mI` minus the sum of its parts, when `mI` was elicited.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    Value(f64),
    NotSupplied,
}

impl Serialize for Residual {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Residual::Value(v) => serializer.serialize_f64(*v),
            Residual::NotSupplied => serializer.serialize_str("NOT_SUPPLIED"),
        }
    }
}

pub fn closure_residual(record: &CongruenceRecord) -> Residual {
    match record.m_i {
        Some(m_i) => {
            let parts = record.m_s + record.m_c + record.m_cbar + record.m_obar.iter().sum::<f64>();
            Residual::Value(m_i - parts)
        }
        None => Residual::NotSupplied,
    }
}

/// Congruence summary for one record, as served by the analysis endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CongruenceReport {
    pub stakeholder_id: Id,
    pub epsilon: f64,
    pub congruent: bool,
    pub ratio_c: f64,
    pub ratio_cbar: f64,
    pub residual: Residual,
}

pub fn congruence_report(records: &[CongruenceRecord], epsilon: f64) -> Result<Vec<CongruenceReport>, CongruenceError> {
    records
        .iter()
        .map(|r| {
            let check = check_congruence(r, epsilon)?;
            Ok(CongruenceReport {
                stakeholder_id: r.stakeholder_id.clone(),
                epsilon,
                congruent: check.congruent,
                ratio_c: check.ratio_c,
                ratio_cbar: check.ratio_cbar,
                residual: closure_residual(r),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    LeafObstacle,
    Solution,
    Resource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkNode {
    pub id: Id,
    pub kind: NodeKind,
}

/// Structural edge: solution addresses leaf, resource implements solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimaryEdge {
    pub from: Id,
    pub to: Id,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParasiticKind {
    Aggravates,
    DependsOn,
    Emergent,
}

/// Stakeholder-declared dependency outside the radial hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParasiticEdge {
    pub from: Id,
    pub to: Id,
    pub kind: ParasiticKind,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DependencyNetwork {
    pub nodes: Vec<NetworkNode>,
    pub primary_edges: Vec<PrimaryEdge>,
    pub parasitic_edges: Vec<ParasiticEdge>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("dependency `{from}` -> `{to}` names an unknown node")]
    DanglingDependency { from: Id, to: Id },
    #[error("dependency on `{0}` loops back to itself")]
    SelfLoop(Id),
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::DanglingDependency { .. } => "DANGLING_DEPENDENCY",
            NetworkError::SelfLoop(_) => "SELF_LOOP",
        }
    }
}

/// Nodes are leaf obstacles, solutions and resources; primary edges are
/// induced by solution attachment and resource assignment.
pub fn build_dependency_network(
    model: &ProblemModel,
    declared: &[ParasiticEdge],
) -> Result<DependencyNetwork, NetworkError> {
    let mut nodes: Vec<NetworkNode> = model
        .obstacles
        .iter()
        .filter(|o| o.is_leaf)
        .map(|o| NetworkNode { id: o.id.clone(), kind: NodeKind::LeafObstacle })
        .collect();
    nodes.extend(model.solutions.iter().map(|s| NetworkNode { id: s.id.clone(), kind: NodeKind::Solution }));
    nodes.extend(model.resources.iter().map(|r| NetworkNode { id: r.id.clone(), kind: NodeKind::Resource }));

    let mut primary_edges: Vec<PrimaryEdge> = model
        .solutions
        .iter()
        .map(|s| PrimaryEdge { from: s.id.clone(), to: s.leaf_obstacle_id.clone() })
        .collect();
    primary_edges.extend(
        model
            .assignments
            .iter()
            .map(|a| PrimaryEdge { from: a.resource_id.clone(), to: a.solution_id.clone() }),
    );

    let known: BTreeSet<&Id> = nodes.iter().map(|n| &n.id).collect();
    for edge in declared {
        check_parasitic(edge, &known)?;
    }
    Ok(DependencyNetwork { nodes, primary_edges, parasitic_edges: declared.to_vec() })
}

pub(crate) fn check_parasitic(edge: &ParasiticEdge, known: &BTreeSet<&Id>) -> Result<(), NetworkError> {
    if !known.contains(&edge.from) || !known.contains(&edge.to) {
        return Err(NetworkError::DanglingDependency { from: edge.from.clone(), to: edge.to.clone() });
    }
    if edge.from == edge.to {
        return Err(NetworkError::SelfLoop(edge.from.clone()));
    }
    Ok(())
}

/// Checks a new declaration against the current model.
pub fn check_declaration(model: &ProblemModel, edge: &ParasiticEdge) -> Result<(), NetworkError> {
    let network = build_dependency_network(model, &[])?;
    let known: BTreeSet<&Id> = network.nodes.iter().map(|n| &n.id).collect();
    check_parasitic(edge, &known)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Measure {
    #[default]
    ParasiticRatio,
    Cyclomatic,
    Density,
    DegreeEntropy,
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "PARASITIC_RATIO" => Ok(Measure::ParasiticRatio),
            "CYCLOMATIC" => Ok(Measure::Cyclomatic),
            "DENSITY" => Ok(Measure::Density),
            "DEGREE_ENTROPY" => Ok(Measure::DegreeEntropy),
            other => Err(format!("unknown measure `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplexityReport {
    /// Circuit rank E - N + C of the undirected multigraph skeleton.
    pub cyclomatic: u64,
    pub parasitic_ratio: f64,
    pub density: f64,
    /// Shannon entropy of the degree distribution, in bits.
    pub degree_entropy: f64,
    pub measure: Measure,
    pub h: f64,
    pub h_crit: f64,
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("critical threshold must be positive and finite, got {0}")]
pub struct InvalidThreshold(pub f64);

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Computes every measure, selects `measure` as h, and applies `h < h_crit`.
pub fn complexity_gate(
    network: &DependencyNetwork,
    measure: Measure,
    h_crit: f64,
) -> Result<ComplexityReport, InvalidThreshold> {
    if !(h_crit.is_finite() && h_crit > 0.0) {
        return Err(InvalidThreshold(h_crit));
    }
    let index: BTreeMap<&Id, usize> = network.nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let n = network.nodes.len();
    let edges: Vec<(usize, usize)> = network
        .primary_edges
        .iter()
        .map(|e| (&e.from, &e.to))
        .chain(network.parasitic_edges.iter().map(|e| (&e.from, &e.to)))
        .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)))
        .collect();

    let mut sets = DisjointSet::new(n);
    let mut degree = vec![0usize; n];
    let mut pairs = BTreeSet::new();
    for &(a, b) in &edges {
        sets.union(a, b);
        degree[a] += 1;
        degree[b] += 1;
        pairs.insert((a.min(b), a.max(b)));
    }
    let components = (0..n).filter(|&i| sets.find(i) == i).count();
    let cyclomatic = (edges.len() + components - n) as u64;

    let parasitic_ratio = network.parasitic_edges.len() as f64 / network.primary_edges.len().max(1) as f64;
    let density = if n < 2 {
        0.0
    } else {
        pairs.len() as f64 / (n * (n - 1) / 2) as f64
    };
    let degree_entropy = {
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        for d in &degree {
            *histogram.entry(*d).or_default() += 1;
        }
        let total = n as f64;
        let h: f64 = histogram
            .values()
            .map(|&count| {
                let p = count as f64 / total;
                -p * p.log2()
            })
            .sum();
        // a single-valued distribution yields -0.0
        if h > 0.0 { h } else { 0.0 }
    };

    let h = match measure {
        Measure::ParasiticRatio => parasitic_ratio,
        Measure::Cyclomatic => cyclomatic as f64,
        Measure::Density => density,
        Measure::DegreeEntropy => degree_entropy,
    };
    Ok(ComplexityReport {
        cyclomatic,
        parasitic_ratio,
        density,
        degree_entropy,
        measure,
        h,
        h_crit,
        applicable: h < h_crit,
    })
}
