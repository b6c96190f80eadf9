use psm_core::layout::{compute_layout, to_svg, LayoutConfig, SectorKind};
use psm_core::session::*;
use psm_testkit::fixtures::{self, Script, BASE_TS};
use serde_json::json;

#[test]
fn submit_leaves_the_prior_session_unchanged() {
    let session = fixtures::session_in(Phase::Obstacles);
    let before = session.snapshot();
    let body = EventBody::LeafMarked(LeafMarked { obstacle_id: psm_core::model::Id::new("t1").unwrap() });
    let (next, event, _) = session.submit("facilitator", BASE_TS + 999_000, &body).unwrap();
    assert_eq!(session.snapshot(), before);
    assert_eq!(next.head_seq(), session.head_seq() + 1);
    assert_eq!(event.prev_hash, session.head_hash());
    assert!(next.model().obstacle("t1").unwrap().is_leaf);
}

#[test]
fn out_of_phase_events_are_phase_coherence_errors() {
    let session = fixtures::session_in(Phase::Goal);
    let payload = json!({ "leafId": "o1", "label": "early", "share": 1.0 });
    let err = session.submit_raw("facilitator", BASE_TS, EventKind::SolutionAdded, &payload).unwrap_err();
    assert_eq!(err.code(), "PHASE_COHERENCE");
    // The gate runs before the payload is even looked at.
    let err = session.submit_raw("facilitator", BASE_TS, EventKind::SolutionAdded, &json!(7)).unwrap_err();
    assert_eq!(err.code(), "PHASE_COHERENCE");
}

#[test]
fn advancing_lists_what_is_missing() {
    let (session, _) = fixtures::fig2_themes().play("themes").unwrap();
    let unmet = session.unmet_for_advance();
    assert_eq!(unmet.len(), 6, "{unmet:?}");
    assert!(session.advance_phase("facilitator", BASE_TS + 10_000_000).is_err());

    let (solutions, _) = fixtures::fig1d().play("d").unwrap();
    let (thin, _) = Script::new()
        .advance(Phase::Resources)
        .play_from(solutions.clone())
        .unwrap();
    assert_eq!(thin.phase(), Phase::Resources);

    let (uncovered, _) = Script::agreed_goal("Reach it.")
        .subdivide("goal", &[("a", "A", 0.5), ("b", "B", 0.5)])
        .leaf("a")
        .leaf("b")
        .advance(Phase::Solutions)
        .solution("sa", "a", "Only a", 1.0)
        .play("u")
        .unwrap();
    let unmet = uncovered.unmet_for_advance();
    assert_eq!(unmet.len(), 1);
    assert_eq!(unmet[0].id.as_ref().map(|i| i.as_str()), Some("b"));
}

#[test]
fn early_revisions_are_allowed_with_a_warning() {
    let session = fixtures::session_in(Phase::Implementation);
    let started = session.log()[0].timestamp;
    let (revised, warnings) =
        session.open_revision(RevisionScope::Minor, Phase::Solutions, "facilitator", started + 30 * DAY_MS).unwrap();
    assert_eq!(revised.phase(), Phase::Solutions);
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].required_ms, 365 * DAY_MS);

    let (_, warnings) =
        session.open_revision(RevisionScope::Major, Phase::Obstacles, "facilitator", started + 1100 * DAY_MS).unwrap();
    assert!(warnings.is_empty());

    let goal_phase = fixtures::session_in(Phase::Goal);
    assert!(goal_phase.open_revision(RevisionScope::Minor, Phase::Goal, "facilitator", BASE_TS).is_err());
}

#[test]
fn policy_rejects_inverted_intervals() {
    assert!(RevisionPolicy::new(10, 5).is_err());
    assert!(RevisionPolicy::new(0, 5).is_err());
    assert!(RevisionPolicy::new(5, 10).is_ok());
}

#[test]
fn layout_svg_is_byte_stable() {
    let (session, _) = fixtures::fig1e_implementation().play("fig1e").unwrap();
    let config = LayoutConfig::default();
    let sectors = compute_layout(session.model(), &config);
    let svg = to_svg(&sectors, &config);
    assert_eq!(svg, to_svg(&compute_layout(session.model(), &config), &config));
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fig1e.svg");
    if std::env::var_os("PSM_BLESS").is_some() {
        std::fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(golden).unwrap());
}

#[test]
fn six_themes_fill_the_first_ring() {
    let (session, _) = fixtures::fig2_themes().play("themes").unwrap();
    let sectors = compute_layout(session.model(), &LayoutConfig::default());
    let ring: Vec<_> = sectors.iter().filter(|s| s.depth == 1).collect();
    assert_eq!(ring.len(), 6);
    assert!(ring.iter().all(|s| s.kind == SectorKind::Obstacle && (s.span_deg - 60.0).abs() < 1e-9));
    let total: f64 = ring.iter().map(|s| s.span_deg).sum();
    assert!((total - 360.0).abs() < 1e-9);
}
