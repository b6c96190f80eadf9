//! One PASS/FAIL line per acceptance criterion at full size. Runs without
//! the test harness so the lines always reach the output; exits non-zero
//! if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use psm_core::persist::{append_event, LOG_EXTENSION};
use psm_testkit::criteria::*;
use psm_testkit::fixtures;

const FUZZ_SEQUENCES: usize = 10_000;
const EXHAUSTIVE_FLIP_LOGS: usize = 2;

/// The tamper fixture through the real binary: exit 1 naming the bad seq.
fn cli_tamper(dir: &Path) -> Result<String, String> {
    let (session, _) = fixtures::fig1e().play("tamper").map_err(|e| e.to_string())?;
    let log = dir.join(format!("tamper{LOG_EXTENSION}"));
    for event in session.log() {
        append_event(&log, event).map_err(|e| e.to_string())?;
    }
    let text = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
    let needle = "\"share\":0.25";
    let at = text.find(needle).ok_or("fixture lacks the 0.25 share")?;
    let seq = text[..at].matches('\n').count() + 1;
    std::fs::write(&log, text.replacen(needle, "\"share\":0.26", 1)).map_err(|e| e.to_string())?;
    let output = Command::new(env!("CARGO_BIN_EXE_psm"))
        .arg("verify-log")
        .arg(&log)
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    let expected = format!("BAD seq={seq}:");
    if output.status.code() == Some(1) && stdout.starts_with(&expected) {
        Ok(format!("tampered fixture: psm verify-log exit 1, {}", expected.trim_end_matches(':')))
    } else {
        Err(format!("tampered fixture: exit {:?}, stdout {stdout:?}", output.status.code()))
    }
}

fn main() {
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("temp dir");
    let campaign = fuzz_campaign(FUZZ_SEQUENCES, 12, EXHAUSTIVE_FLIP_LOGS);

    let mut endurance = endurance_outcome(&campaign);
    match cli_tamper(dir.path()) {
        Ok(detail) => endurance.detail = format!("{}; {detail}", endurance.detail),
        Err(detail) => {
            endurance.pass = false;
            endurance.detail = format!("{}; {detail}", endurance.detail);
        }
    }

    let outcomes = [
        impact_normalization(1000, 11),
        figure_fixtures(),
        coherence_outcome(&campaign),
        endurance,
        congruence_equations(100, 13),
        complexity_gate_checks(100, 14),
        sroi_checks(100, 15),
        layout_checks(200, 16),
    ];
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria pass in {:.1}s", outcomes.len() - failed, outcomes.len(), started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
