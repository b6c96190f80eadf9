//! The `psm` command line.
//!
//! Exit codes: 0 success, 1 validation or verification failure (including
//! unreadable inputs), 2 usage error.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psm_core::applicability::Measure;
use psm_core::canonical;
use psm_core::layout::{compute_layout, to_svg, LayoutConfig};
use psm_core::model::{validate, Id, ProblemModel};
use psm_core::persist::{
    append_line, read_model, replay, session_id_for, verify_log, write_model, LogVerdict, PersistError,
    LOG_EXTENSION,
};
use psm_core::session::{EventKind, RevisionPolicy, Session};
use serde::Deserialize;
use serde_json::Value;

use crate::analysis::{self, Analysis, Inputs, Params};
use crate::error::ApiError;
use crate::store::{now_ms, Store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DATA_DIR_ENV: &str = "PSM_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "psm", version, about = "Phase-gated problem-solving models: sessions, analyses and layouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataDir {
    /// Directory holding `<id>.psm.log` session logs.
    #[arg(long, env = DATA_DIR_ENV, default_value = "psm-data")]
    data_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create an empty session log.
    Init {
        /// Session id; a random one is chosen when omitted.
        id: Option<String>,
        #[command(flatten)]
        data: DataDir,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[command(flatten)]
        data: DataDir,
    },
    /// Apply a file of events (one JSON object per line) to a session log.
    Apply {
        events: PathBuf,
        /// Log to extend; created when missing. Without it the events are
        /// applied to a fresh in-memory session.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also write the resulting model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a `.psm.json` model.
    Validate { model: PathBuf },
    /// Run an analysis on a `.psm.json` model or a `.psm.log` session.
    Analyze {
        #[arg(value_enum)]
        kind: AnalysisArg,
        model: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = psm_core::applicability::DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value = "parasitic-ratio")]
        measure: String,
        #[arg(long, default_value_t = psm_core::applicability::DEFAULT_H_CRIT)]
        h_crit: f64,
    },
    /// Sector list, or an SVG file with `--svg`.
    Layout {
        model: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value_t = LayoutConfig::default().goal_radius)]
        goal_radius: f64,
        #[arg(long, default_value_t = LayoutConfig::default().ring_thickness)]
        ring_thickness: f64,
        #[arg(long, default_value_t = LayoutConfig::default().start_angle_deg, allow_negative_numbers = true)]
        start_angle: f64,
    },
    /// Replay a log and print the resulting snapshot.
    Replay { log: PathBuf },
    /// Check a log's hash chain.
    VerifyLog { log: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnalysisArg {
    Impact,
    Sroi,
    Complexity,
    Congruence,
}

impl From<AnalysisArg> for Analysis {
    fn from(a: AnalysisArg) -> Self {
        match a {
            AnalysisArg::Impact => Analysis::Impact,
            AnalysisArg::Sroi => Analysis::Sroi,
            AnalysisArg::Complexity => Analysis::Complexity,
            AnalysisArg::Congruence => Analysis::Congruence,
        }
    }
}

/// Outcome of a subcommand that did not succeed.
enum Failure {
    Usage(String),
    Failed(String),
}

impl From<PersistError> for Failure {
    fn from(e: PersistError) -> Self {
        Failure::Failed(format!("{}: {e}", e.code()))
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        if e.http_status == 400 && e.code != "MALFORMED_REQUEST" {
            Failure::Usage(format!("{}: {}", e.code, e.message))
        } else {
            Failure::Failed(format!("{}: {}", e.code, e.message))
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Failed(format!("IO_ERROR: {}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = if informational { write!(out, "{e}") } else { write!(err, "{e}") };
            return if informational { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "psm: {message}");
            EXIT_USAGE
        }
        Err(Failure::Failed(message)) => {
            let _ = writeln!(err, "psm: {message}");
            EXIT_FAILURE
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    writeln!(out, "{text}").map_err(|e| Failure::Failed(format!("IO_ERROR: stdout: {e}")))
}

fn is_log(path: &Path) -> bool {
    path.to_string_lossy().ends_with(LOG_EXTENSION)
}

/// A model file gives a bare model; a log gives the replayed session.
enum Loaded {
    Model(Box<ProblemModel>),
    Session(Box<Session>),
}

impl Loaded {
    fn read(path: &Path) -> Result<Self, Failure> {
        if is_log(path) {
            Ok(Loaded::Session(Box::new(replay(path, RevisionPolicy::default())?)))
        } else {
            Ok(Loaded::Model(Box::new(read_model(path)?)))
        }
    }

    fn inputs(&self) -> Inputs<'_> {
        match self {
            Loaded::Model(m) => Inputs::of_model(m),
            Loaded::Session(s) => Inputs::of_session(s),
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Init { id, data } => {
            let store = Store::new(&data.data_dir, RevisionPolicy::default())?;
            let live = store.create(id.as_deref())?;
            let id = live.current().id().clone();
            emit(out, &store.log_path(&id).display().to_string())?;
            Ok(EXIT_OK)
        }
        Command::Serve { bind, data } => {
            let store = Arc::new(Store::new(&data.data_dir, RevisionPolicy::default())?);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Failed(e.to_string()))?;
            runtime
                .block_on(crate::http::serve(store, &bind))
                .map_err(|e| Failure::Failed(format!("IO_ERROR: {bind}: {e}")))?;
            Ok(EXIT_OK)
        }
        Command::Apply { events, log, out: model_out } => apply(&events, log.as_deref(), model_out.as_deref(), out),
        Command::Validate { model } => {
            let text = std::fs::read_to_string(&model).map_err(|e| io_failure(&model, e))?;
            match psm_core::persist::deserialize_model(&text) {
                Ok(m) => {
                    emit(out, &format!("OK obstacles={} solutions={} resources={}", m.obstacles.len(), m.solutions.len(), m.resources.len()))?;
                    Ok(EXIT_OK)
                }
                Err(PersistError::Validation { violations }) => {
                    for v in &violations {
                        emit(out, &canonical::to_string(v).unwrap_or_else(|_| format!("{v:?}")))?;
                    }
                    Err(Failure::Failed(format!("VALIDATION_ERROR: {} violations", violations.len())))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Analyze { kind, model, csv, epsilon, measure, h_crit } => {
            let measure: Measure = measure.parse().map_err(Failure::Usage)?;
            let params = Params { epsilon, measure, h_crit };
            let loaded = Loaded::read(&model)?;
            let kind = Analysis::from(kind);
            if csv {
                let text = analysis::csv(kind, loaded.inputs(), &params)?;
                write!(out, "{text}").map_err(|e| Failure::Failed(e.to_string()))?;
            } else {
                let doc = analysis::document(kind, loaded.inputs(), &params)?;
                emit(out, &canonical::value_to_string(&doc))?;
            }
            Ok(EXIT_OK)
        }
        Command::Layout { model, svg, goal_radius, ring_thickness, start_angle } => {
            let config =
                LayoutConfig::new(goal_radius, ring_thickness, start_angle).map_err(|e| Failure::Usage(e.to_string()))?;
            let loaded = Loaded::read(&model)?;
            let sectors = compute_layout(loaded.inputs().model, &config);
            match svg {
                Some(path) => {
                    std::fs::write(&path, to_svg(&sectors, &config)).map_err(|e| io_failure(&path, e))?;
                    emit(out, &format!("wrote {} sectors to {}", sectors.len(), path.display()))?;
                }
                None => emit(out, &canonical::to_string(&sectors).map_err(|e| Failure::Failed(e.to_string()))?)?,
            }
            Ok(EXIT_OK)
        }
        Command::Replay { log } => {
            let session = replay(&log, RevisionPolicy::default())?;
            emit(out, &psm_core::persist::snapshot_to_string(&session.snapshot()))?;
            Ok(EXIT_OK)
        }
        Command::VerifyLog { log } => match verify_log(&log)? {
            LogVerdict::Ok { count, .. } => {
                emit(out, &format!("OK seq={count}"))?;
                Ok(EXIT_OK)
            }
            LogVerdict::Bad { seq, reason } => {
                emit(out, &format!("BAD seq={seq}: {reason}"))?;
                Ok(EXIT_FAILURE)
            }
        },
    }
}

/// One line of an events file. The timestamp defaults to now.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Proposal {
    kind: EventKind,
    actor: String,
    #[serde(default)]
    payload: Value,
    timestamp: Option<i64>,
}

/// All or nothing: every proposal is applied in memory first and the log is
/// only extended when all of them were accepted.
fn apply(events: &Path, log: Option<&Path>, model_out: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let file = std::fs::File::open(events).map_err(|e| io_failure(events, e))?;
    let mut proposals = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_failure(events, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Proposal = serde_json::from_str(&line)
            .map_err(|e| Failure::Failed(format!("MALFORMED_REQUEST: {}:{}: {e}", events.display(), i + 1)))?;
        proposals.push((i + 1, p));
    }

    let mut session = match log {
        Some(path) if path.exists() => replay(path, RevisionPolicy::default())?,
        Some(path) => Session::new(session_id_for(path)?, RevisionPolicy::default()),
        None => Session::new(Id::new("apply").expect("literal id"), RevisionPolicy::default()),
    };
    let start = session.head_seq();
    for (line, p) in &proposals {
        let last = session.log().last().map_or(i64::MIN, |e| e.timestamp);
        let timestamp = p.timestamp.unwrap_or_else(|| now_ms().max(last));
        if let Err(e) = session.submit_raw_mut(&p.actor, timestamp, p.kind, &p.payload) {
            return Err(Failure::Failed(format!("{}:{line}: {}: {e}", events.display(), e.code())));
        }
    }
    if let Some(path) = log {
        for event in &session.log()[start as usize..] {
            append_line(path, event)?;
        }
    }
    if let Some(path) = model_out {
        debug_assert!(validate(session.model()).is_empty());
        write_model(path, session.model())?;
    }
    emit(out, &format!("applied {} events; seq={} phase={}", proposals.len(), session.head_seq(), session.phase()))?;
    Ok(EXIT_OK)
}
