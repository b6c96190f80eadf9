//! Acceptance checks with their stated tolerances. Each returns an
//! [`Outcome`] instead of panicking so a runner can report every criterion.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::UnGraph;
use psm_core::applicability::{
    build_dependency_network, check_congruence, closure_residual, complexity_gate, CongruenceRecord,
    DependencyNetwork, Measure, ParasiticEdge, ParasiticKind,
};
use psm_core::impact::{goal_impact, impact_factors, sroi, Ratio};
use psm_core::layout::{compute_layout, to_svg, LayoutConfig, SectorKind};
use psm_core::model::{sentence_count, validate, GoalStatus, Id, ProblemModel};
use psm_core::persist::{parse_log, replay_events, snapshot_to_string, verify_bytes, LogVerdict};
use psm_core::session::{gate_check, Event, EventKind, Phase, RevisionPolicy, SessionError};
use rand::Rng as _;
use serde_json::json;

use crate::fixtures::{self, Script};
use crate::gen::{self, Shape};
use crate::{fuzz, oracle, seeded, Rng};

pub const IMPACT_SUM_TOL: f64 = 1e-9;
/// DP and path enumeration agree bit for bit on trees; on DAGs the two sum
/// the same products in different orders.
pub const IMPACT_ORACLE_TOL: f64 = 1e-12;
pub const SPAN_TOL_DEG: f64 = 1e-9;
pub const RATIO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(name: &'static str, failures: Vec<String>, summary: String) -> Self {
        let pass = failures.is_empty();
        let detail = if pass {
            summary
        } else {
            let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
            format!("{summary}; {} failures, first: {}", failures.len(), shown.join(" | "))
        };
        Outcome { name, pass, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

macro_rules! check {
    ($failures:expr, $cond:expr, $($fmt:tt)+) => {
        if !$cond {
            $failures.push(format!($($fmt)+));
        }
    };
}

/// Σ over terminal obstacles of goal impact is 1; the DP matches path
/// enumeration on every model of at most 50 obstacles.
pub fn impact_normalization(models: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let (mut compared, mut exact, mut dags, mut worst_sum, mut worst_oracle) = (0, 0, 0, 0.0f64, 0.0f64);
    for m in 0..models {
        let shape = Shape { max_nodes: if m % 2 == 0 { 50 } else { 120 }, ..Shape::default() };
        let mut model = gen::random_dag(&mut rng, shape);
        let dyadic = m % 4 == 0;
        if dyadic {
            gen::make_dyadic(&mut rng, &mut model);
        }
        let violations = validate(&model);
        check!(failures, violations.is_empty(), "model {m} invalid: {:?}", violations.first());
        if model.obstacles.iter().any(|o| o.parents.len() > 1) {
            dags += 1;
        }
        let impacts = impact_factors(&model);
        let total: f64 = oracle::terminal_ids(&model).iter().map(|t| impacts[t.as_str()]).sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
        check!(failures, (total - 1.0).abs() <= IMPACT_SUM_TOL, "model {m}: leaf impacts sum to {total}");
        if model.obstacles.len() <= 50 {
            compared += 1;
            exact += usize::from(dyadic);
            let expected = oracle::path_impacts(&model);
            for (id, want) in &expected {
                let got = goal_impact(&model, id).expect("known obstacle");
                worst_oracle = worst_oracle.max((got - want).abs());
                if dyadic {
                    check!(failures, got.to_bits() == want.to_bits(), "model {m} node {id}: {got} vs {want} (dyadic)");
                } else {
                    check!(failures, (got - want).abs() <= IMPACT_ORACLE_TOL, "model {m} node {id}: {got} vs {want}");
                }
            }
        }
    }
    Outcome::new(
        "impact normalization",
        failures,
        format!(
            "{models} models ({dags} multi-parent), max |sum-1| = {worst_sum:.1e} (tol {IMPACT_SUM_TOL:.0e}); \
             {compared} models <= 50 nodes vs path enumeration, bit-exact on the {exact} with dyadic weights, \
             max dev {worst_oracle:.1e} otherwise (tol {IMPACT_ORACLE_TOL:.0e})"
        ),
    )
}

/// The figure shapes rebuilt from event sequences.
pub fn figure_fixtures() -> Outcome {
    let mut failures = Vec::new();
    let play = |name: &str, script: Script| -> Option<ProblemModel> {
        match script.play(name) {
            Ok((session, _)) => Some(session.model().clone()),
            Err(e) => {
                eprintln!("{name}: {e}");
                None
            }
        }
    };
    let shape = |m: &ProblemModel| {
        (
            m.obstacles.len(),
            m.obstacles.iter().filter(|o| o.is_leaf).count(),
            m.solutions.len(),
            m.resources.len(),
            m.assignments.len(),
        )
    };
    let expected = [
        ("fig1a", fixtures::fig1a(), (1, 1, 1, 0, 0)),
        ("fig1b", fixtures::fig1b(), (2, 2, 2, 0, 0)),
        ("fig1c", fixtures::fig1c(), (2, 2, 3, 0, 0)),
        ("fig1d", fixtures::fig1d(), (4, 3, 4, 0, 0)),
        ("fig1e", fixtures::fig1e(), (4, 3, 4, 2, 2)),
        ("fig2", fixtures::fig2_subdivided(), (21, 15, 0, 0, 0)),
    ];
    let mut models = BTreeMap::new();
    for (name, script, want) in expected {
        match play(name, script) {
            Some(model) => {
                check!(failures, shape(&model) == want, "{name}: shape {:?}, expected {want:?}", shape(&model));
                check!(failures, validate(&model).is_empty(), "{name}: snapshot invalid");
                models.insert(name, model);
            }
            None => failures.push(format!("{name}: script rejected")),
        }
    }
    if let Some(b) = models.get("fig1b") {
        let w1 = b.obstacles[0].parents[0].weight;
        let w2 = b.obstacles[1].parents[0].weight;
        check!(failures, w2 > w1, "fig1b: o2 should outweigh o1");
    }
    if let Some(e) = models.get("fig1e") {
        let shares: Vec<f64> = e.assignments.iter().map(|a| a.share).collect();
        check!(failures, shares == vec![0.25, 0.75], "fig1e: resource shares {shares:?}");
        check!(
            failures,
            e.assignments.iter().all(|a| a.solution_id.as_str() == "s1-1"),
            "fig1e: both resources should serve s1-1"
        );
    }
    if let Some(f) = models.get("fig2") {
        let top: Vec<f64> = f.children_of("goal").map(|(_, w)| w).collect();
        check!(failures, top.len() == 6 && top.iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-12), "fig2: themes {top:?}");
    }

    for goal in [fixtures::INNOVATION_GOAL, fixtures::HARLEM_GOAL] {
        let n = sentence_count(goal);
        check!(failures, (1..=3).contains(&n), "goal statement has {n} sentences");
        match Script::agreed_goal(goal).play("goal") {
            Ok((session, _)) => {
                check!(failures, session.model().goal.text == goal, "goal text not stored verbatim");
                check!(failures, session.model().goal.status == GoalStatus::Agreed, "goal not agreed");
            }
            Err(e) => failures.push(format!("goal statement rejected: {e}")),
        }
    }

    match fixtures::streetlights().play("streetlights") {
        Ok((session, _)) => {
            let m = session.model();
            let mut labels = Vec::new();
            let mut node = "goal".to_string();
            loop {
                let kids: Vec<_> = m.children_of(&node).map(|(o, _)| o).collect();
                let Some(next) = kids.iter().find(|o| fixtures::STREETLIGHT_CHAIN.contains(&o.label.as_str())) else {
                    break;
                };
                labels.push(next.label.clone());
                node = next.id.to_string();
            }
            check!(failures, labels == fixtures::STREETLIGHT_CHAIN, "streetlights chain {labels:?}");
            let leaf = m.obstacle(&node);
            check!(failures, leaf.is_some_and(|o| o.is_leaf), "streetlights chain does not end in a leaf");
            let solutions: Vec<&str> = m.solutions_of(&node).map(|s| s.label.as_str()).collect();
            check!(failures, solutions == fixtures::STREETLIGHT_SOLUTIONS, "streetlight solutions {solutions:?}");
        }
        Err(e) => failures.push(format!("streetlights rejected: {e}")),
    }
    Outcome::new(
        "figure fixtures",
        failures,
        "fig 1(a)-(e), six-theme model, two goal statements, streetlights chain".into(),
    )
}

/// The admission table written out independently of the engine.
fn expected_gate(phase: Phase, kind: EventKind) -> bool {
    use EventKind as K;
    let allowed: &[EventKind] = match phase {
        Phase::Goal => &[K::StakeholderRegistered, K::GoalDrafted, K::GoalEdited, K::GoalAgreed, K::CongruenceRecorded, K::PhaseAdvanced],
        Phase::Obstacles => &[K::ObstacleAdded, K::ObstacleSubdivided, K::WeightsSet, K::LeafMarked, K::PhaseAdvanced],
        Phase::Solutions => &[K::SolutionAdded, K::PhaseAdvanced],
        Phase::Resources => &[K::ResourceRegistered, K::ResourceAssigned, K::PhaseAdvanced],
        Phase::Implementation => &[
            K::ProgressReported,
            K::SpendReported,
            K::DependencyDeclared,
            K::CongruenceRecorded,
            K::MinorRevisionOpened,
            K::MajorRevisionOpened,
        ],
    };
    allowed.contains(&kind)
}

/// Statistics of a fuzz campaign, shared by the coherence and endurance checks.
#[derive(Debug, Default)]
pub struct Campaign {
    pub sequences: usize,
    pub proposals: usize,
    pub accepted: usize,
    pub gate_denied: usize,
    pub reached: BTreeMap<&'static str, usize>,
    pub coherence_failures: Vec<String>,
    pub endurance_failures: Vec<String>,
    pub replayed: usize,
    pub flips: usize,
}

/// Gate-table sweep plus fuzzed sequences. Every accepted log is also
/// replayed twice and byte-flipped: at every offset of the first
/// `exhaustive_logs` logs and at one random offset of each other log.
pub fn fuzz_campaign(sequences: usize, seed: u64, exhaustive_logs: usize) -> Campaign {
    let mut rng = seeded(seed);
    let mut c = Campaign { sequences, ..Campaign::default() };

    for phase in Phase::ALL {
        let session = fixtures::session_in(phase);
        for kind in EventKind::ALL {
            let engine = gate_check(phase, kind);
            if engine != expected_gate(phase, kind) {
                c.coherence_failures.push(format!("gate({phase}, {kind}) = {engine}"));
            }
            let result = session.submit_raw("facilitator", fixtures::BASE_TS + 1_000_000, kind, &json!({}));
            let coherence = matches!(result, Err(SessionError::PhaseCoherence { .. }));
            if coherence == engine {
                c.coherence_failures.push(format!("{phase} x {kind}: submit gave {result:?}"));
            }
        }
    }
    check_roster_gate(&mut c.coherence_failures);

    for n in 0..sequences {
        let len = rng.random_range(20..=70);
        let mut fail = Vec::new();
        let (mut proposals, mut accepted, mut denied) = (0, 0, 0);
        let session = fuzz::run(&mut rng, "fuzz", len, |step, session| {
            proposals += 1;
            let admitted = gate_check(step.phase_before, step.kind);
            match &step.result {
                Ok(()) => {
                    accepted += 1;
                    if !admitted {
                        fail.push(format!("seq {n}: accepted gate-denied {} in {}", step.kind, step.phase_before));
                    }
                    let violations = validate(session.model());
                    if !violations.is_empty() {
                        fail.push(format!("seq {n}: snapshot invalid after {}: {:?}", step.kind, violations[0]));
                    }
                    if step.phase_before == Phase::Goal && session.phase() == Phase::Obstacles {
                        let roster: BTreeSet<&Id> = session.model().stakeholders.iter().map(|s| &s.id).collect();
                        let agreed: BTreeSet<&Id> = session.model().goal.agreed_by.iter().collect();
                        if session.model().goal.status != GoalStatus::Agreed || roster != agreed || roster.is_empty() {
                            fail.push(format!("seq {n}: left GOAL without full-roster agreement"));
                        }
                    }
                }
                Err(err) => {
                    if !admitted {
                        denied += 1;
                        if !matches!(err, SessionError::PhaseCoherence { .. }) {
                            fail.push(format!("seq {n}: gate-denied {} gave {}", step.kind, err.code()));
                        }
                    } else if matches!(err, SessionError::PhaseCoherence { .. }) {
                        fail.push(format!("seq {n}: admitted {} reported PHASE_COHERENCE", step.kind));
                    }
                }
            }
        });
        c.proposals += proposals;
        c.accepted += accepted;
        c.gate_denied += denied;
        *c.reached.entry(session.phase().as_str()).or_default() += 1;
        c.coherence_failures.extend(fail);

        let exhaustive = n < exhaustive_logs;
        endurance_check(&mut rng, &session, exhaustive, &mut c);
    }
    c
}

fn check_roster_gate(failures: &mut Vec<String>) {
    let base = Script::new()
        .stakeholder("p1", "One")
        .stakeholder("p2", "Two")
        .stakeholder("p3", "Three")
        .draft(fixtures::INNOVATION_GOAL);
    for roster in [vec![], vec!["p1"], vec!["p1", "p2"], vec!["p1", "p2", "p4"]] {
        let partial = base.clone().agree(&roster).advance(Phase::Obstacles);
        if partial.play("roster").is_ok() {
            failures.push(format!("advanced to OBSTACLES with roster {roster:?}"));
        }
    }
    let (session, _) = base.clone().play("roster").expect("base script");
    if session.advance_phase("facilitator", fixtures::BASE_TS + 10 * fixtures::STEP_MS).is_ok() {
        failures.push("advanced to OBSTACLES with no agreement".into());
    }
    if base.clone().agree(&["p1", "p2", "p3"]).advance(Phase::Obstacles).play("roster").is_err() {
        failures.push("full roster could not advance".into());
    }
    // A late registration reopens agreement.
    let late = base.agree(&["p1", "p2", "p3"]).stakeholder("p4", "Four").advance(Phase::Obstacles);
    if late.play("roster").is_ok() {
        failures.push("advanced after a stakeholder joined post-agreement".into());
    }
}

fn endurance_check(rng: &mut Rng, live: &psm_core::session::Session, exhaustive: bool, c: &mut Campaign) {
    let events = live.log();
    let bytes: Vec<u8> = events.iter().flat_map(|e| format!("{}\n", e.to_canonical()).into_bytes()).collect();
    let parsed = match parse_log(&bytes) {
        Ok(p) => p,
        Err(e) => {
            c.endurance_failures.push(format!("own log rejected: {e}"));
            return;
        }
    };
    let replay = |events: &[Event]| replay_events(live.id().clone(), RevisionPolicy::default(), events);
    match (replay(&parsed), replay(&parsed)) {
        (Ok(a), Ok(b)) => {
            let (sa, sb, sl) = (snapshot_to_string(&a.snapshot()), snapshot_to_string(&b.snapshot()), snapshot_to_string(&live.snapshot()));
            if sa != sb || sa != sl || a.log() != live.log() {
                c.endurance_failures.push("replay diverged from live application".into());
            }
            c.replayed += 1;
        }
        (Err(e), _) | (_, Err(e)) => c.endurance_failures.push(format!("replay failed: {e}")),
    }
    if events.is_empty() {
        return;
    }

    let mut offsets: Vec<(usize, u64)> = Vec::new();
    let mut start = 0;
    for e in events {
        let len = e.to_canonical().len() + 1;
        if exhaustive {
            offsets.extend((start..start + len).map(|o| (o, e.seq)));
        }
        start += len;
    }
    if !exhaustive {
        let offset = rng.random_range(0..bytes.len());
        let seq = bytes[..offset].iter().filter(|&&b| b == b'\n').count() as u64 + 1;
        offsets.push((offset, seq));
    }
    // Verification is sequential, so the verdict for a flip in line k is
    // already settled by the prefix ending with line k + 1.
    let line_ends: Vec<usize> = bytes.iter().enumerate().filter(|(_, &b)| b == b'\n').map(|(i, _)| i + 1).collect();
    let mut flipped = bytes.clone();
    for (offset, seq) in offsets {
        let cut = line_ends.get(seq as usize).copied().unwrap_or(bytes.len());
        let original = flipped[offset];
        let mask = match c.flips % 3 {
            0 => 0x01,
            1 => 0x20,
            _ => 0xFF,
        };
        flipped[offset] = original ^ mask;
        c.flips += 1;
        match verify_bytes(&flipped[..cut]) {
            LogVerdict::Ok { .. } => {
                c.endurance_failures.push(format!("flip at byte {offset} (seq {seq}, mask {mask:#04x}) went unnoticed"))
            }
            LogVerdict::Bad { seq: bad, .. } if bad > seq => {
                c.endurance_failures.push(format!("flip in seq {seq} reported at seq {bad}"))
            }
            LogVerdict::Bad { .. } => {}
        }
        flipped[offset] = original;
    }
}

pub fn coherence_outcome(c: &Campaign) -> Outcome {
    let reached: Vec<String> = c.reached.iter().map(|(p, n)| format!("{p}={n}")).collect();
    Outcome::new(
        "phase coherence",
        c.coherence_failures.clone(),
        format!(
            "5x18 gate table; {} sequences, {} proposals, {} accepted, {} gate-denied all rejected; final phases {}",
            c.sequences,
            c.proposals,
            c.accepted,
            c.gate_denied,
            reached.join(" ")
        ),
    )
}

pub fn endurance_outcome(c: &Campaign) -> Outcome {
    Outcome::new(
        "endurance",
        c.endurance_failures.clone(),
        format!("{} logs replayed twice with identical canonical bytes; {} single-byte flips all rejected", c.replayed, c.flips),
    )
}

fn random_record(rng: &mut Rng, k: usize) -> CongruenceRecord {
    // Multiples of 1/1024 keep sums exact so a consistent mI closes to zero.
    let q = |rng: &mut Rng, hi: u32| f64::from(rng.random_range(0..hi)) / 1024.0;
    let m_s = f64::from(rng.random_range(1..8192u32)) / 1024.0;
    let m_c = q(rng, 4096);
    let m_cbar = q(rng, 4096);
    let m_obar: Vec<f64> = (0..k).map(|_| q(rng, 2048)).collect();
    let m_i = m_s + m_c + m_cbar + m_obar.iter().sum::<f64>();
    CongruenceRecord {
        stakeholder_id: Id::unchecked(format!("p{}", rng.random_range(0..100))),
        m_s,
        m_c,
        m_cbar,
        refactored_obstacle_ids: (0..k).map(|i| Id::unchecked(format!("o{i}"))).collect(),
        m_obar,
        m_i: Some(m_i),
    }
}

/// Closure residual, ε-monotonicity and ratio arithmetic.
pub fn congruence_equations(records: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let grid: Vec<f64> = (1..=20).map(|i| f64::from(i) * 0.049).collect();
    for n in 0..records {
        let record = random_record(&mut rng, n % 4);
        match closure_residual(&record) {
            psm_core::applicability::Residual::Value(r) => check!(failures, r == 0.0, "record {n}: residual {r}"),
            other => failures.push(format!("record {n}: residual {other:?}")),
        }
        let want_c = record.m_c / record.m_s;
        let want_cbar = record.m_cbar / record.m_s;
        let mut previous = false;
        for &eps in &grid {
            match check_congruence(&record, eps) {
                Ok(check) => {
                    check!(failures, (check.ratio_c - want_c).abs() <= RATIO_TOL * want_c.max(1.0), "record {n}: ratioC");
                    check!(
                        failures,
                        (check.ratio_cbar - want_cbar).abs() <= RATIO_TOL * want_cbar.max(1.0),
                        "record {n}: ratioCbar"
                    );
                    let expect = want_c <= eps && want_cbar <= eps;
                    check!(failures, check.congruent == expect, "record {n} eps {eps}: congruent {}", check.congruent);
                    check!(failures, !previous || check.congruent, "record {n}: congruence lost as eps grew to {eps}");
                    previous = check.congruent;
                }
                Err(e) => failures.push(format!("record {n} eps {eps}: {e}")),
            }
        }
    }
    Outcome::new(
        "congruence equations",
        failures,
        format!("{records} random records: residual exactly 0, ratios vs recomputation (tol {RATIO_TOL:.0e}), monotone on a 20-point eps grid"),
    )
}

fn forest_model(rng: &mut Rng) -> ProblemModel {
    let mut model = gen::random_model(rng, Shape { max_nodes: 12, max_depth: 3, ..Shape::default() });
    // Give every assignment its own resource so the skeleton stays a forest.
    model.resources.clear();
    for (i, a) in model.assignments.iter_mut().enumerate() {
        a.resource_id = Id::unchecked(format!("fr{i}"));
        model.resources.push(psm_core::model::Resource {
            id: a.resource_id.clone(),
            name: format!("forest resource {i}"),
            kind: psm_core::model::ResourceKind::Other,
        });
    }
    model
}

fn petgraph_rank(network: &DependencyNetwork) -> (usize, bool) {
    let mut graph = UnGraph::<(), ()>::new_undirected();
    let index: BTreeMap<&Id, _> = network.nodes.iter().map(|n| (&n.id, graph.add_node(()))).collect();
    for (a, b) in network
        .primary_edges
        .iter()
        .map(|e| (&e.from, &e.to))
        .chain(network.parasitic_edges.iter().map(|e| (&e.from, &e.to)))
    {
        graph.add_edge(index[a], index[b], ());
    }
    let components = petgraph::algo::connected_components(&graph);
    let rank = graph.edge_count() + components - graph.node_count();
    (rank, petgraph::algo::is_cyclic_undirected(&graph))
}

/// Connected-component labels of the undirected skeleton, via petgraph.
fn component_labels(network: &DependencyNetwork) -> Vec<usize> {
    let index: BTreeMap<&Id, usize> = network.nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let mut sets = petgraph::unionfind::UnionFind::<usize>::new(network.nodes.len());
    for (a, b) in network
        .primary_edges
        .iter()
        .map(|e| (&e.from, &e.to))
        .chain(network.parasitic_edges.iter().map(|e| (&e.from, &e.to)))
    {
        sets.union(index[a], index[b]);
    }
    sets.into_labeling()
}

fn edge(from: &Id, to: &Id) -> ParasiticEdge {
    ParasiticEdge { from: from.clone(), to: to.clone(), kind: ParasiticKind::DependsOn, note: String::new() }
}

/// A parasitic edge whose endpoints are already connected (so it closes a
/// cycle), or `None` when every component is a single node.
fn closing_edge(rng: &mut Rng, network: &DependencyNetwork) -> Option<ParasiticEdge> {
    let labels = component_labels(network);
    let pairs: Vec<(usize, usize)> = (0..labels.len())
        .flat_map(|a| (0..labels.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && labels[a] == labels[b])
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let (a, b) = pairs[rng.random_range(0..pairs.len())];
    Some(edge(&network.nodes[a].id, &network.nodes[b].id))
}

/// An edge joining two different components, if there are two.
fn bridging_edge(network: &DependencyNetwork) -> Option<ParasiticEdge> {
    let labels = component_labels(network);
    let b = (1..labels.len()).find(|&b| labels[b] != labels[0])?;
    Some(edge(&network.nodes[0].id, &network.nodes[b].id))
}

/// Forest baseline, +k edges raise μ by k, gate flips exactly at hCrit,
/// and μ agrees with petgraph on small networks.
pub fn complexity_gate_checks(networks: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let h_grid = [1e-12, 1e-6, 0.01, 0.25, 1.0, 100.0];
    let (mut cross_checked, mut raised, mut bridged) = (0, 0, 0);
    for n in 0..networks {
        let model = forest_model(&mut rng);
        let base = build_dependency_network(&model, &[]).expect("no declarations");
        for &h_crit in &h_grid {
            let report = complexity_gate(&base, Measure::ParasiticRatio, h_crit).expect("valid threshold");
            check!(failures, report.cyclomatic == 0, "forest {n}: mu = {}", report.cyclomatic);
            check!(failures, report.parasitic_ratio == 0.0, "forest {n}: ratio {}", report.parasitic_ratio);
            check!(failures, report.applicable, "forest {n}: not applicable at hCrit {h_crit}");
        }
        let mu0 = complexity_gate(&base, Measure::Cyclomatic, 1.0).expect("valid").cyclomatic;
        if let Some(bridge) = bridging_edge(&base) {
            let joined = build_dependency_network(&model, &[bridge]).expect("edges reference nodes");
            let mu = complexity_gate(&joined, Measure::Cyclomatic, 1.0).expect("valid").cyclomatic;
            check!(failures, mu == mu0, "net {n}: bridging two components changed mu to {mu}");
            bridged += 1;
        }
        let mut declared = Vec::new();
        let mut network = base.clone();
        for k in 1..=5u64 {
            let Some(edge) = closing_edge(&mut rng, &network) else { break };
            declared.push(edge);
            network = build_dependency_network(&model, &declared).expect("edges reference nodes");
            raised += 1;
            let report = complexity_gate(&network, Measure::ParasiticRatio, 0.25).expect("valid");
            check!(failures, report.cyclomatic == mu0 + k, "net {n}: mu {} after {k} edges", report.cyclomatic);
            if network.nodes.len() <= 30 {
                cross_checked += 1;
                let (rank, cyclic) = petgraph_rank(&network);
                check!(failures, rank as u64 == report.cyclomatic, "net {n}: petgraph rank {rank}");
                check!(failures, cyclic == (report.cyclomatic > 0), "net {n}: cyclic {cyclic}");
            }
            for measure in [Measure::ParasiticRatio, Measure::Cyclomatic, Measure::Density, Measure::DegreeEntropy] {
                let h = complexity_gate(&network, measure, 1.0).expect("valid").h;
                if h <= 0.0 {
                    continue;
                }
                let at = complexity_gate(&network, measure, h).expect("valid");
                let above = complexity_gate(&network, measure, h.next_up()).expect("valid");
                let below = complexity_gate(&network, measure, h.next_down()).expect("valid");
                check!(failures, !at.applicable && above.applicable && !below.applicable, "net {n}: {measure:?} gate at h={h}");
            }
        }
        let (rank, cyclic) = petgraph_rank(&base);
        check!(failures, rank as u64 == mu0 && !cyclic, "forest {n}: petgraph rank {rank}");
    }
    Outcome::new(
        "complexity gate",
        failures,
        format!(
            "{networks} forest networks: mu = 0 and applicable for all hCrit > 0; {raised} cycle-closing parasitic \
             edges each raised mu by 1 (k = 1..5); {bridged} component-bridging edges left mu unchanged; \
             {cross_checked} networks cross-checked with petgraph; gate flips exactly at h = hCrit"
        ),
    )
}

/// sROI against the path-enumeration oracle, UNDEFINED at zero spend and
/// the two monotonicity properties.
pub fn sroi_checks(models: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() <= RATIO_TOL * a.abs().max(b.abs()).max(1e-300);
    let mut undefined = 0;
    for n in 0..models {
        let model = gen::random_model(&mut rng, Shape { max_nodes: 40, ..Shape::default() });
        let report = sroi(&model);
        let compare = |label: &str, got: &psm_core::impact::SroiEntry, (needle, spend): (f64, f64), failures: &mut Vec<String>| {
            check!(failures, close(got.needle_movement, needle), "model {n} {label}: needle {} vs {needle}", got.needle_movement);
            check!(failures, got.spend == spend, "model {n} {label}: spend");
            match got.sroi {
                Ratio::Undefined => check!(failures, spend == 0.0, "model {n} {label}: UNDEFINED with spend {spend}"),
                Ratio::Defined(v) => {
                    check!(failures, spend > 0.0, "model {n} {label}: defined at zero spend");
                    check!(failures, close(v, needle / spend), "model {n} {label}: sroi {v} vs {}", needle / spend);
                }
            }
        };
        for (id, want) in oracle::solution_needles(&model) {
            let got = &report.per_solution[id.as_str()];
            if want.1 == 0.0 {
                undefined += 1;
            }
            compare(&id, got, want, &mut failures);
        }
        for (id, want) in oracle::resource_needles(&model) {
            compare(&id, &report.per_resource[id.as_str()], want, &mut failures);
        }

        // Monotonicity on one funded solution with room to move.
        let funded: Vec<usize> = model
            .solutions
            .iter()
            .enumerate()
            .filter(|(_, s)| s.progress < 0.9 && s.progress > 0.0 && report.per_solution[&s.id].spend > 0.0)
            .map(|(i, _)| i)
            .collect();
        if let Some(&i) = funded.first() {
            let sid = model.solutions[i].id.clone();
            let value = |m: &ProblemModel| sroi(m).per_solution[&sid].sroi.value().expect("funded");
            let before = value(&model);
            let mut more_progress = model.clone();
            more_progress.solutions[i].progress += 0.05;
            check!(failures, value(&more_progress) > before, "model {n}: progress up did not raise sroi");
            let mut more_spend = model.clone();
            if let Some(a) = more_spend.assignments.iter_mut().find(|a| a.solution_id == sid) {
                a.spend += 100.0;
            }
            check!(failures, value(&more_spend) < before, "model {n}: spend up did not lower sroi");
        }
    }
    Outcome::new(
        "sROI",
        failures,
        format!("{models} random models vs formula oracle (rel tol {RATIO_TOL:.0e}), {undefined} zero-spend solutions UNDEFINED, monotone in progress and spend"),
    )
}

/// Sibling spans partition parents, top level sums to 360°, radii exact,
/// SVG text identical across renders.
pub fn layout_checks(models: usize, seed: u64) -> Outcome {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let mut sectors_checked = 0;
    let configs = [LayoutConfig::default(), LayoutConfig { goal_radius: 37.5, ring_thickness: 11.25, start_angle_deg: 90.0 }];
    let mut models_list: Vec<ProblemModel> = (0..models).map(|_| gen::random_model(&mut rng, Shape::default())).collect();
    for script in [fixtures::fig1e(), fixtures::fig2_subdivided(), fixtures::streetlights()] {
        models_list.push(script.play("layout").expect("fixture").0.model().clone());
    }
    for (n, model) in models_list.iter().enumerate() {
        let config = configs[n % 2];
        let sectors = compute_layout(model, &config);
        sectors_checked += sectors.len();
        let mut by_parent: BTreeMap<&str, Vec<&psm_core::layout::Sector>> = BTreeMap::new();
        for s in &sectors {
            if let Some(parent) = s.parent_path() {
                by_parent.entry(parent).or_default().push(s);
            }
            let want_inner = if s.depth == 0 { 0.0 } else { config.goal_radius + (s.depth - 1) as f64 * config.ring_thickness };
            let want_outer = if s.depth == 0 { config.goal_radius } else { want_inner + config.ring_thickness };
            check!(failures, s.inner_radius == want_inner && s.outer_radius == want_outer, "model {n} {}: radii", s.path_id);
            check!(failures, s.outer_radius > s.inner_radius && s.span_deg > 0.0, "model {n} {}: degenerate", s.path_id);
        }
        let paths: BTreeMap<&str, &psm_core::layout::Sector> = sectors.iter().map(|s| (s.path_id.as_str(), s)).collect();
        check!(failures, paths.len() == sectors.len(), "model {n}: duplicate path ids");
        for (parent, kids) in &by_parent {
            let p = paths[parent];
            let total: f64 = kids.iter().map(|k| k.span_deg).sum();
            check!(failures, (total - p.span_deg).abs() <= SPAN_TOL_DEG, "model {n} {parent}: children span {total} vs {}", p.span_deg);
            let mut cursor = p.start_angle_deg;
            for k in kids {
                check!(failures, (k.start_angle_deg - cursor).abs() <= SPAN_TOL_DEG, "model {n} {}: gap", k.path_id);
                cursor = k.end_angle_deg();
            }
        }
        if !model.obstacles.is_empty() {
            let top: f64 = sectors.iter().filter(|s| s.depth == 1).map(|s| s.span_deg).sum();
            check!(failures, (top - 360.0).abs() <= SPAN_TOL_DEG, "model {n}: top spans {top}");
        }
        let uncovered_ok = sectors.iter().filter(|s| s.kind == SectorKind::Uncovered).all(|s| s.path_id.ends_with("/~uncovered"));
        check!(failures, uncovered_ok, "model {n}: uncovered path ids");
        let a = to_svg(&sectors, &config);
        let b = to_svg(&compute_layout(&model.clone(), &config), &config);
        check!(failures, a == b, "model {n}: SVG differs between renders");
    }
    Outcome::new(
        "layout",
        failures,
        format!("{} models, {sectors_checked} sectors: partitions within {SPAN_TOL_DEG:.0e} deg, radii exact, SVG identical across renders", models_list.len()),
    )
}
