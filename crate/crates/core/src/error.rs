use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::challenge::Violation;
use crate::stage::Stage;

#[derive(Debug, Error)]
pub enum ChallengeError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed challenge document: {0}")]
    Parse(String),
    #[error("challenge document does not match schema: {0}")]
    Schema(String),
    #[error("challenge violates invariants: {}", list(.0))]
    Invariant(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Why the stage machine refused an event.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("{event} is not permitted in stage {stage}")]
    IllegalEvent { stage: Stage, event: &'static str },
    #[error("the session has already finished")]
    SessionFinished,
    #[error("responses must contain at least one letter or number")]
    ArticulationRejected,
    #[error("the program cannot be edited in stage {0}")]
    EditRejected(Stage),
    #[error("the program cannot be run in stage {0}")]
    RunRejected(Stage),
    #[error("line {line} is outside the program (1..={line_count})")]
    OutOfRange { line: u32, line_count: usize },
}

impl TransitionError {
    /// Stable machine-readable code, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            TransitionError::IllegalEvent { .. } => "illegal_event",
            TransitionError::SessionFinished => "session_finished",
            TransitionError::ArticulationRejected => "articulation_rejected",
            TransitionError::EditRejected(_) => "edit_rejected",
            TransitionError::RunRejected(_) => "run_rejected",
            TransitionError::OutOfRange { .. } => "out_of_range",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("could not start interpreter {command:?}: {message}")]
    SpawnFailure { command: String, message: String },
    #[error("a test harness needs at least one test case")]
    NoTestCases,
    #[error("interpreter command is empty")]
    EmptyCommand,
    #[error("program is empty")]
    EmptyProgram,
    #[error("timeout must be positive")]
    ZeroTimeout,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("event at {ts_ms} ms precedes the previous event at {last_ms} ms in session {session_id}")]
    Ordering {
        session_id: String,
        ts_ms: u64,
        last_ms: u64,
    },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("malformed session: {0}")]
    MalformedSession(String),
    #[error("bad log line {line} in {path}: {message}")]
    Decode {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("log io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no sessions to analyse")]
    NoData,
    #[error("log references unknown challenge {0}")]
    MissingChallenge(String),
    #[error("no participants appear in both the survey and the logs")]
    JoinError,
    #[error("survey: {0}")]
    Survey(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("writing output: {0}")]
    Output(String),
}
