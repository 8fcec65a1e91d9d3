//! Append-only session event log.
//!
//! Each session is one JSON Lines file named `<session_id>.jsonl`; every line
//! is a [`SessionEvent`] with the fields `session_id`, `participant_id`,
//! `challenge_id`, `ts_ms`, `kind` and `payload`. There is no update or
//! delete.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::LogError;
use crate::stage::{policy, NextChoice, Stage};

/// What a program run looked like: the program text, what went in and what
/// came out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub program: String,
    pub stdin: Vec<String>,
    pub stdout: String,
    pub stderr: String,
    pub error_message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    /// The student reached the end of the process.
    Finished,
    /// The session was closed before the end.
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    SessionStarted {},
    StageEntered { stage: Stage, iteration: u32 },
    StageExited { stage: Stage },
    ResponseSubmitted { stage: Stage, text: String },
    ProgramRun(RunSnapshot),
    ProgramEdited { new_text: String },
    LineSelected { line: u32, correct: bool },
    HintShown { index: usize },
    TestOutcomeReported {
        self_report: bool,
        harness_passed: Option<bool>,
        next_choice: NextChoice,
    },
    SessionEnded { reason: EndReason },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStarted {} => "SessionStarted",
            EventKind::StageEntered { .. } => "StageEntered",
            EventKind::StageExited { .. } => "StageExited",
            EventKind::ResponseSubmitted { .. } => "ResponseSubmitted",
            EventKind::ProgramRun(_) => "ProgramRun",
            EventKind::ProgramEdited { .. } => "ProgramEdited",
            EventKind::LineSelected { .. } => "LineSelected",
            EventKind::HintShown { .. } => "HintShown",
            EventKind::TestOutcomeReported { .. } => "TestOutcomeReported",
            EventKind::SessionEnded { .. } => "SessionEnded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub challenge_id: String,
    /// UTC milliseconds since the Unix epoch.
    pub ts_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub trait EventStore {
    fn append(&mut self, event: SessionEvent) -> Result<(), LogError>;
}

fn check_order(session_id: &str, last_ms: Option<u64>, ts_ms: u64) -> Result<(), LogError> {
    match last_ms {
        Some(last_ms) if ts_ms < last_ms => Err(LogError::Ordering {
            session_id: session_id.to_string(),
            ts_ms,
            last_ms,
        }),
        _ => Ok(()),
    }
}

/// In-memory store, mostly for tests and simulation.
#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    sessions: BTreeMap<String, Vec<SessionEvent>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self, id: &str) -> Option<&[SessionEvent]> {
        self.sessions.get(id).map(Vec::as_slice)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &[SessionEvent]> {
        self.sessions.values().map(Vec::as_slice)
    }
}

impl EventStore for MemoryStore {
    fn append(&mut self, event: SessionEvent) -> Result<(), LogError> {
        match self.sessions.get_mut(&event.session_id) {
            Some(events) => {
                check_order(&event.session_id, events.last().map(|e| e.ts_ms), event.ts_ms)?;
                events.push(event);
            }
            None if matches!(event.kind, EventKind::SessionStarted {}) => {
                self.sessions.insert(event.session_id.clone(), vec![event]);
            }
            None => return Err(LogError::UnknownSession(event.session_id)),
        }
        Ok(())
    }
}

pub fn session_file(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.jsonl"))
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Appends to a single session's file. One writer per session.
#[derive(Debug)]
pub struct SessionWriter {
    session_id: String,
    path: PathBuf,
    file: File,
    last_ms: Option<u64>,
    sync: bool,
}

impl SessionWriter {
    /// Starts a new session file; the first event must be `SessionStarted`.
    pub fn create(dir: &Path, first: &SessionEvent) -> Result<Self, LogError> {
        if !matches!(first.kind, EventKind::SessionStarted {}) || !valid_session_id(&first.session_id) {
            return Err(LogError::UnknownSession(first.session_id.clone()));
        }
        fs::create_dir_all(dir)?;
        let path = session_file(dir, &first.session_id);
        let file = OpenOptions::new().append(true).create_new(true).open(&path)?;
        let mut w = SessionWriter {
            session_id: first.session_id.clone(),
            path,
            file,
            last_ms: None,
            sync: true,
        };
        w.write(first)?;
        Ok(w)
    }

    /// Reopens an existing session file for further appends.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let events = read_session_file(path)?;
        let first = events
            .first()
            .ok_or_else(|| LogError::MalformedSession(format!("{} is empty", path.display())))?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(SessionWriter {
            session_id: first.session_id.clone(),
            path: path.to_path_buf(),
            file,
            last_ms: events.last().map(|e| e.ts_ms),
            sync: true,
        })
    }

    /// Skip fsync after each append. Used for bulk generation.
    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_ts_ms(&self) -> Option<u64> {
        self.last_ms
    }

    pub fn append(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        if event.session_id != self.session_id {
            return Err(LogError::UnknownSession(event.session_id.clone()));
        }
        self.write(event)
    }

    fn write(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        check_order(&self.session_id, self.last_ms, event.ts_ms)?;
        let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.last_ms = Some(event.ts_ms);
        Ok(())
    }
}

/// Directory of session files.
#[derive(Debug)]
pub struct JsonlStore {
    dir: PathBuf,
    writers: HashMap<String, SessionWriter>,
    sync: bool,
}

impl JsonlStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        JsonlStore {
            dir: dir.into(),
            writers: HashMap::new(),
            sync: true,
        }
    }

    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl EventStore for JsonlStore {
    fn append(&mut self, event: SessionEvent) -> Result<(), LogError> {
        if let Some(w) = self.writers.get_mut(&event.session_id) {
            return w.append(&event);
        }
        let path = session_file(&self.dir, &event.session_id);
        let w = if matches!(event.kind, EventKind::SessionStarted {}) && !path.exists() {
            SessionWriter::create(&self.dir, &event)?
        } else if path.exists() {
            let mut w = SessionWriter::open(&path)?;
            w.append(&event)?;
            w
        } else {
            return Err(LogError::UnknownSession(event.session_id));
        };
        let w = if self.sync { w } else { w.without_sync() };
        self.writers.insert(event.session_id.clone(), w);
        Ok(())
    }
}

pub fn read_session_file(path: &Path) -> Result<Vec<SessionEvent>, LogError> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| LogError::Decode {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Groups events by session, keeping each session's relative order.
pub fn group_sessions(events: impl IntoIterator<Item = SessionEvent>) -> BTreeMap<String, Vec<SessionEvent>> {
    let mut out: BTreeMap<String, Vec<SessionEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.session_id.clone()).or_default().push(e);
    }
    out
}

/// Reads every `*.jsonl` file in `dir`, returning sessions sorted by id.
pub fn read_log_dir(dir: &Path) -> Result<Vec<Vec<SessionEvent>>, LogError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_session_file(&p)?);
    }
    Ok(group_sessions(all).into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Inconsistency {
    TimestampRegression { index: usize },
    UnmatchedExit { index: usize, stage: Stage },
    NestedEnter { index: usize, stage: Stage },
    RunOutsideRunStage { index: usize, stage: Option<Stage> },
    EditOutsideEditStage { index: usize, stage: Option<Stage> },
    MixedSessions { index: usize },
}

/// Checks one session's events against the log invariants and the stage
/// policy table. The store accepts anything well-ordered; this is where
/// policy violations show up.
pub fn check_consistency(events: &[SessionEvent]) -> Vec<Inconsistency> {
    let mut issues = Vec::new();
    let mut open: Option<Stage> = None;
    for (index, e) in events.iter().enumerate() {
        if index > 0 {
            let prev = &events[index - 1];
            if e.ts_ms < prev.ts_ms {
                issues.push(Inconsistency::TimestampRegression { index });
            }
            if e.session_id != prev.session_id {
                issues.push(Inconsistency::MixedSessions { index });
            }
        }
        match &e.kind {
            EventKind::StageEntered { stage, .. } => {
                if open.is_some() {
                    issues.push(Inconsistency::NestedEnter { index, stage: *stage });
                }
                open = Some(*stage);
            }
            EventKind::StageExited { stage } => {
                if open != Some(*stage) {
                    issues.push(Inconsistency::UnmatchedExit { index, stage: *stage });
                }
                open = None;
            }
            EventKind::ProgramRun(_) if !open.is_some_and(|s| policy(s).can_run) => {
                issues.push(Inconsistency::RunOutsideRunStage { index, stage: open });
            }
            EventKind::ProgramEdited { .. } if !open.is_some_and(|s| policy(s).can_edit) => {
                issues.push(Inconsistency::EditOutsideEditStage { index, stage: open });
            }
            _ => {}
        }
    }
    issues
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageInstance {
    pub stage: Stage,
    pub iteration: u32,
    pub entered_ms: u64,
    pub exited_ms: u64,
    pub seconds: f64,
    pub runs: u32,
    pub responses: Vec<String>,
    /// No StageExited was logged; the instance was cut at the session end.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineSelection {
    pub line: u32,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub challenge_id: String,
    pub started_ms: u64,
    pub ended_ms: u64,
    pub stage_instances: Vec<StageInstance>,
    pub line_selections: Vec<LineSelection>,
    pub hints_shown: u32,
    /// Last run made while debugging (before Modify and Make).
    pub final_snapshot: Option<RunSnapshot>,
    /// Harness verdict attached to the last reported Test outcome.
    pub final_harness_verdict: Option<bool>,
    /// The student reported a successful fix at least once.
    pub completed: bool,
    pub end_reason: Option<EndReason>,
    pub total_seconds: f64,
    /// Time not covered by any stage instance.
    pub idle_gap_seconds: f64,
}

impl SessionSummary {
    pub fn first_selection_correct(&self) -> Option<bool> {
        self.line_selections.first().map(|s| s.correct)
    }

    pub fn instances_of(&self, stage: Stage) -> impl Iterator<Item = &StageInstance> {
        self.stage_instances.iter().filter(move |i| i.stage == stage)
    }

    pub fn responses(&self) -> impl Iterator<Item = (Stage, &str)> {
        self.stage_instances
            .iter()
            .flat_map(|i| i.responses.iter().map(move |r| (i.stage, r.as_str())))
    }

    pub fn stage_seconds(&self) -> f64 {
        self.stage_instances.iter().map(|i| i.seconds).sum()
    }
}

fn ms_to_s(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Folds one session's events into per-stage dwell times, run counts and
/// outcome data.
pub fn summarize(events: &[SessionEvent]) -> Result<SessionSummary, LogError> {
    let first = events
        .first()
        .ok_or_else(|| LogError::MalformedSession("no events".into()))?;
    let malformed = |msg: String| LogError::MalformedSession(format!("{}: {msg}", first.session_id));

    let mut instances: Vec<StageInstance> = Vec::new();
    let mut open: Option<usize> = None;
    let mut line_selections = Vec::new();
    let mut hints_shown = 0;
    let mut final_snapshot = None;
    let mut final_harness_verdict = None;
    let mut completed = false;
    let mut end: Option<(u64, EndReason)> = None;

    for (i, e) in events.iter().enumerate() {
        if e.session_id != first.session_id {
            return Err(malformed(format!("event {i} belongs to session {}", e.session_id)));
        }
        if i > 0 && e.ts_ms < events[i - 1].ts_ms {
            return Err(malformed(format!("timestamp regression at event {i}")));
        }
        if end.is_some() {
            return Err(malformed(format!("event {i} after SessionEnded")));
        }
        match &e.kind {
            EventKind::SessionStarted {} if i > 0 => {
                return Err(malformed(format!("second SessionStarted at event {i}")))
            }
            EventKind::StageEntered { stage, iteration } => {
                if open.is_some() {
                    return Err(malformed(format!("{stage} entered while another stage is open")));
                }
                open = Some(instances.len());
                instances.push(StageInstance {
                    stage: *stage,
                    iteration: *iteration,
                    entered_ms: e.ts_ms,
                    exited_ms: e.ts_ms,
                    seconds: 0.0,
                    runs: 0,
                    responses: Vec::new(),
                    clipped: false,
                });
            }
            EventKind::StageExited { stage } => {
                let Some(idx) = open.take().filter(|&idx| instances[idx].stage == *stage) else {
                    return Err(malformed(format!("unmatched StageExited({stage}) at event {i}")));
                };
                let inst = &mut instances[idx];
                inst.exited_ms = e.ts_ms;
                inst.seconds = ms_to_s(e.ts_ms - inst.entered_ms);
            }
            EventKind::ResponseSubmitted { text, .. } => {
                if let Some(idx) = open {
                    instances[idx].responses.push(text.clone());
                }
            }
            EventKind::ProgramRun(snapshot) => {
                if let Some(idx) = open {
                    instances[idx].runs += 1;
                    if !matches!(instances[idx].stage, Stage::Modify | Stage::Make) {
                        final_snapshot = Some(snapshot.clone());
                    }
                }
            }
            EventKind::LineSelected { line, correct } => line_selections.push(LineSelection {
                line: *line,
                correct: *correct,
            }),
            EventKind::HintShown { .. } => hints_shown += 1,
            EventKind::TestOutcomeReported {
                self_report,
                harness_passed,
                ..
            } => {
                final_harness_verdict = *harness_passed;
                completed |= *self_report;
            }
            EventKind::SessionEnded { reason } => end = Some((e.ts_ms, *reason)),
            EventKind::SessionStarted {} | EventKind::ProgramEdited { .. } => {}
        }
    }

    let last_ms = events.last().map(|e| e.ts_ms).unwrap_or(first.ts_ms);
    let ended_ms = end.map(|(ts, _)| ts).unwrap_or(last_ms);
    if let Some(idx) = open {
        let inst = &mut instances[idx];
        inst.exited_ms = ended_ms;
        inst.seconds = ms_to_s(ended_ms - inst.entered_ms);
        inst.clipped = true;
    }

    let total_seconds = ms_to_s(ended_ms - first.ts_ms);
    let covered: u64 = instances.iter().map(|i| i.exited_ms - i.entered_ms).sum();
    Ok(SessionSummary {
        session_id: first.session_id.clone(),
        participant_id: first.participant_id.clone(),
        challenge_id: first.challenge_id.clone(),
        started_ms: first.ts_ms,
        ended_ms,
        stage_instances: instances,
        line_selections,
        hints_shown,
        final_snapshot,
        final_harness_verdict,
        completed,
        end_reason: end.map(|(_, r)| r),
        total_seconds,
        idle_gap_seconds: ms_to_s(ended_ms - first.ts_ms - covered),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ts_ms: u64, kind: EventKind) -> SessionEvent {
        SessionEvent {
            session_id: "s1".into(),
            participant_id: Some("p1".into()),
            challenge_id: "number-timeline".into(),
            ts_ms,
            kind,
        }
    }

    fn run() -> EventKind {
        EventKind::ProgramRun(RunSnapshot {
            program: "print(1)".into(),
            stdin: vec![],
            stdout: "1\n".into(),
            stderr: String::new(),
            error_message: None,
        })
    }

    fn enter(stage: Stage) -> EventKind {
        EventKind::StageEntered { stage, iteration: 1 }
    }

    fn exit(stage: Stage) -> EventKind {
        EventKind::StageExited { stage }
    }

    #[test]
    fn wire_format_field_names() {
        let v = serde_json::to_value(ev(5, enter(Stage::Predict))).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["challenge_id", "kind", "participant_id", "payload", "session_id", "ts_ms"]
        );
        assert_eq!(v["kind"], "StageEntered");
        assert_eq!(v["payload"]["stage"], "Predict");

        let v = serde_json::to_value(ev(5, run())).unwrap();
        let mut keys: Vec<_> = v["payload"].as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["error_message", "program", "stderr", "stdin", "stdout"]);

        let v = serde_json::to_value(ev(0, EventKind::SessionStarted {})).unwrap();
        assert_eq!(v["payload"], serde_json::json!({}));
    }

    #[test]
    fn canonical_opening_accepted() {
        let mut store = MemoryStore::new();
        store.append(ev(0, EventKind::SessionStarted {})).unwrap();
        store.append(ev(0, enter(Stage::Predict))).unwrap();
        assert_eq!(store.session("s1").unwrap().len(), 2);
    }

    #[test]
    fn timestamp_regression_rejected() {
        let mut store = MemoryStore::new();
        store.append(ev(10, EventKind::SessionStarted {})).unwrap();
        assert!(matches!(
            store.append(ev(9, enter(Stage::Predict))),
            Err(LogError::Ordering { .. })
        ));
    }

    #[test]
    fn unknown_session_rejected() {
        let mut store = MemoryStore::new();
        assert!(matches!(
            store.append(ev(0, enter(Stage::Predict))),
            Err(LogError::UnknownSession(_))
        ));
    }

    #[test]
    fn run_in_spot_is_stored_but_flagged() {
        let mut store = MemoryStore::new();
        for e in [
            ev(0, EventKind::SessionStarted {}),
            ev(1, enter(Stage::SpotTheDefect)),
            ev(2, run()),
        ] {
            store.append(e).unwrap();
        }
        let issues = check_consistency(store.session("s1").unwrap());
        assert_eq!(
            issues,
            vec![Inconsistency::RunOutsideRunStage {
                index: 2,
                stage: Some(Stage::SpotTheDefect)
            }]
        );
    }

    #[test]
    fn dwell_time_is_exit_minus_enter() {
        let events = [
            ev(0, EventKind::SessionStarted {}),
            ev(0, enter(Stage::Predict)),
            ev(51_000, exit(Stage::Predict)),
        ];
        let s = summarize(&events).unwrap();
        assert_eq!(s.stage_instances[0].seconds, 51.0);
        assert!(!s.stage_instances[0].clipped);
    }

    #[test]
    fn run_counts_attributed_to_instances() {
        let events = [
            ev(0, EventKind::SessionStarted {}),
            ev(0, enter(Stage::InspectTheCode)),
            ev(1_000, exit(Stage::InspectTheCode)),
            ev(1_000, enter(Stage::Test)),
            ev(2_000, run()),
            ev(3_000, exit(Stage::Test)),
        ];
        let s = summarize(&events).unwrap();
        assert_eq!(s.instances_of(Stage::InspectTheCode).next().unwrap().runs, 0);
        assert_eq!(s.instances_of(Stage::Test).next().unwrap().runs, 1);
        assert!(s.final_snapshot.is_some());
    }

    #[test]
    fn open_stage_clipped_at_session_end() {
        let events = [
            ev(0, EventKind::SessionStarted {}),
            ev(1_000, enter(Stage::Predict)),
            ev(4_000, EventKind::SessionEnded { reason: EndReason::Abandoned }),
        ];
        let s = summarize(&events).unwrap();
        assert_eq!(s.stage_instances[0].seconds, 3.0);
        assert!(s.stage_instances[0].clipped);
        assert_eq!(s.total_seconds, 4.0);
        assert_eq!(s.idle_gap_seconds, 1.0);
    }

    #[test]
    fn unmatched_exit_is_malformed() {
        let events = [
            ev(0, EventKind::SessionStarted {}),
            ev(0, enter(Stage::Predict)),
            ev(1, exit(Stage::Run)),
        ];
        assert!(matches!(summarize(&events), Err(LogError::MalformedSession(_))));
    }

    #[test]
    fn modify_runs_do_not_replace_final_snapshot() {
        let mut later = run();
        if let EventKind::ProgramRun(s) = &mut later {
            s.program = "print(2)".into();
        }
        let events = [
            ev(0, EventKind::SessionStarted {}),
            ev(0, enter(Stage::Test)),
            ev(1, run()),
            ev(2, exit(Stage::Test)),
            ev(2, enter(Stage::Modify)),
            ev(3, later),
        ];
        let s = summarize(&events).unwrap();
        assert_eq!(s.final_snapshot.unwrap().program, "print(1)");
    }

    #[test]
    fn jsonl_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = JsonlStore::new(dir.path()).without_sync();
        let events = vec![
            ev(0, EventKind::SessionStarted {}),
            ev(0, enter(Stage::Predict)),
            ev(10, exit(Stage::Predict)),
        ];
        for e in events.clone() {
            store.append(e).unwrap();
        }
        assert!(matches!(
            store.append(ev(5, enter(Stage::Run))),
            Err(LogError::Ordering { .. })
        ));
        let back = read_log_dir(dir.path()).unwrap();
        assert_eq!(back, vec![events]);
    }

    #[test]
    fn jsonl_store_rejects_unknown_session() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = JsonlStore::new(dir.path());
        assert!(matches!(
            store.append(ev(0, enter(Stage::Predict))),
            Err(LogError::UnknownSession(_))
        ));
    }
}
