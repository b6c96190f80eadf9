use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use psm_cli::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use psm_core::layout::{compute_layout, to_svg, LayoutConfig};
use psm_core::persist::{append_event, write_model, LOG_EXTENSION, MODEL_EXTENSION};
use psm_core::session::Session;
use psm_testkit::{fixtures, oracle};

fn psm(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["psm"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_log(dir: &Path, name: &str, session: &Session) -> PathBuf {
    let path = dir.join(format!("{name}{LOG_EXTENSION}"));
    for event in session.log() {
        append_event(&path, event).unwrap();
    }
    path
}

fn fig2_model(dir: &Path) -> (PathBuf, Session) {
    let (session, _) = fixtures::fig2_subdivided().play("fig2").unwrap();
    let path = dir.join(format!("fig2{MODEL_EXTENSION}"));
    write_model(&path, session.model()).unwrap();
    (path, session)
}

#[test]
fn verify_log_good_and_tampered() {
    let dir = tempfile::tempdir().unwrap();
    let (session, _) = fixtures::fig1e().play("fig1e").unwrap();
    let good = write_log(dir.path(), "good", &session);
    let (code, out, _) = psm(&["verify-log", s(&good)]);
    assert_eq!((code, out.trim()), (EXIT_OK, format!("OK seq={}", session.head_seq()).as_str()));

    let text = fs::read_to_string(&good).unwrap();
    let needle = "\"share\":0.75";
    let seq = text[..text.find(needle).unwrap()].matches('\n').count() + 1;
    let tampered = dir.path().join(format!("tampered{LOG_EXTENSION}"));
    fs::write(&tampered, text.replacen(needle, "\"share\":0.70", 1)).unwrap();
    let (code, out, _) = psm(&["verify-log", s(&tampered)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(out.starts_with(&format!("BAD seq={seq}:")), "{out}");
}

#[test]
fn impact_csv_has_one_row_per_leaf_summing_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let (path, session) = fig2_model(dir.path());
    let (code, out, err) = psm(&["analyze", "impact", s(&path), "--csv"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let leaves = oracle::terminal_ids(session.model());
    assert_eq!(rows.len(), leaves.len());
    assert_eq!(rows.len(), 15);
    let paths = oracle::path_impacts(session.model());
    let mut total = 0.0;
    for row in &rows {
        let impact: f64 = row[2].parse().unwrap();
        assert!((impact - paths[&row[0]]).abs() < 1e-12);
        total += impact;
    }
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

#[test]
fn analyses_as_documents_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (session, _) = fixtures::fig1e_implementation().play("e").unwrap();
    let log = write_log(dir.path(), "e", &session);
    for kind in ["impact", "sroi", "complexity", "congruence"] {
        let (code, out, err) = psm(&["analyze", kind, s(&log)]);
        assert_eq!(code, EXIT_OK, "{kind}: {err}");
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(psm_core::canonical::value_to_string(&doc), out.trim_end());
        let (code, out, _) = psm(&["analyze", kind, s(&log), "--csv"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.lines().count() >= 1);
    }
    let (code, _, err) = psm(&["analyze", "congruence", s(&log), "--epsilon", "3"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
    let (code, _, _) = psm(&["analyze", "complexity", s(&log), "--measure", "vibes"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = fig2_model(dir.path());
    let (code, out, _) = psm(&["validate", s(&path)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("OK obstacles=21"));

    let broken = dir.path().join("broken.psm.json");
    let text = fs::read_to_string(&path).unwrap().replacen("0.16666666666", "0.5", 1);
    fs::write(&broken, text).unwrap();
    let (code, out, err) = psm(&["validate", s(&broken)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("VALIDATION_ERROR"), "{err}");
    assert!(out.contains("WEIGHT_SUM"), "{out}");

    let junk = dir.path().join("junk.psm.json");
    fs::write(&junk, "{\"id\":").unwrap();
    let (code, _, err) = psm(&["validate", s(&junk)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("PARSE_ERROR"));
}

#[test]
fn layout_svg_matches_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let (path, session) = fig2_model(dir.path());
    let svg = dir.path().join("fig2.svg");
    let (code, out, _) = psm(&["layout", s(&path), "--svg", s(&svg)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("wrote "));
    let config = LayoutConfig::default();
    assert_eq!(fs::read_to_string(&svg).unwrap(), to_svg(&compute_layout(session.model(), &config), &config));

    let (code, out, _) = psm(&["layout", s(&path)]);
    assert_eq!(code, EXIT_OK);
    let sectors: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(sectors.as_array().unwrap().len(), compute_layout(session.model(), &config).len());
    let (code, _, _) = psm(&["layout", s(&path), "--ring-thickness", "-1"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn apply_init_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let (code, out, _) = psm(&["init", "room", "--data-dir", s(&data)]);
    assert_eq!(code, EXIT_OK);
    let log = PathBuf::from(out.trim());
    assert!(log.ends_with(format!("room{LOG_EXTENSION}")));
    let (code, _, _) = psm(&["init", "room", "--data-dir", s(&data)]);
    assert_eq!(code, EXIT_FAILURE);

    let lines: Vec<String> = fixtures::fig1b()
        .bodies
        .iter()
        .enumerate()
        .map(|(i, b)| {
            serde_json::json!({ "kind": b.kind(), "actor": "cli", "payload": b.payload(), "timestamp": 1000 + i }).to_string()
        })
        .collect();
    let events = dir.path().join("events.jsonl");
    fs::write(&events, lines.join("\n")).unwrap();
    let model_out = dir.path().join("out.psm.json");
    let (code, out, err) = psm(&["apply", s(&events), "--log", s(&log), "--out", s(&model_out)]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("phase=SOLUTIONS"), "{out}");

    let (code, out, _) = psm(&["replay", s(&log)]);
    assert_eq!(code, EXIT_OK);
    let snapshot: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(snapshot["headSeq"], lines.len());
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model_out).unwrap()).unwrap();
    assert_eq!(snapshot["model"], model);

    // A rejected line leaves the log untouched.
    let before = fs::read(&log).unwrap();
    let bad = dir.path().join("bad.jsonl");
    let advance = r#"{"kind":"PHASE_ADVANCED","actor":"cli","payload":{"to":"RESOURCES"}}"#;
    let leaf = r#"{"kind":"LEAF_MARKED","actor":"cli","payload":{"obstacleId":"o1"}}"#;
    fs::write(&bad, format!("{advance}\n{leaf}\n")).unwrap();
    let (code, _, err) = psm(&["apply", s(&bad), "--log", s(&log)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains(":2: PHASE_COHERENCE"), "{err}");
    assert_eq!(fs::read(&log).unwrap(), before);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(psm(&[]).0, EXIT_USAGE);
    assert_eq!(psm(&["analyze", "weather", "x.psm.json"]).0, EXIT_USAGE);
    assert_eq!(psm(&["frobnicate"]).0, EXIT_USAGE);
    let (code, out, _) = psm(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify-log"));
}

#[test]
fn missing_files_are_failures_not_usage() {
    let (code, _, err) = psm(&["verify-log", "/nonexistent/x.psm.log"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("IO_ERROR"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (session, _) = fixtures::fig1a().play("a").unwrap();
    let log = write_log(dir.path(), "a", &session);
    let mut bytes = fs::read(&log).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    fs::write(&log, bytes).unwrap();
    let bin = env!("CARGO_BIN_EXE_psm");
    let status = Command::new(bin).args(["verify-log", s(&log)]).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_FAILURE));
    let status = Command::new(bin).arg("verify-log").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
}
