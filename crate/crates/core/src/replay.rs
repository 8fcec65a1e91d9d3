//! Rebuilds a session by folding its log back through the stage machine.
//!
//! The log records effects, not commands, so each step guesses the command
//! from the next recorded event and keeps the guess only if the machine
//! emits exactly the recorded events. A replay that succeeds therefore
//! reproduces the recorded stage sequence event for event.

use thiserror::Error;

use crate::challenge::Challenge;
use crate::session_log::{EndReason, EventKind, SessionEvent};
use crate::stage::{advance, ExtensionChoice, SessionState, Stage, TransitionEvent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("log does not open with SessionStarted and the first stage")]
    BadOpening,
    #[error("log is for challenge {found}, not {expected}")]
    WrongChallenge { expected: String, found: String },
    #[error("replay diverges from the log at event {index} ({kind})")]
    Diverged { index: usize, kind: &'static str },
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub state: SessionState,
    /// Stages entered, in order, as produced by the machine.
    pub stage_sequence: Vec<Stage>,
    /// Commands recovered from the log.
    pub commands: Vec<TransitionEvent>,
    /// The log ended with an explicit abandonment.
    pub abandoned: bool,
}

pub fn recorded_stage_sequence(events: &[SessionEvent]) -> Vec<Stage> {
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::StageEntered { stage, .. } => Some(stage),
            _ => None,
        })
        .collect()
}

fn candidates(events: &[SessionEvent], i: usize) -> Vec<TransitionEvent> {
    match &events[i].kind {
        EventKind::ResponseSubmitted { text, .. } => vec![
            TransitionEvent::SubmitResponse { text: text.clone() },
            TransitionEvent::SkipInspect { text: text.clone() },
        ],
        EventKind::ProgramRun(snapshot) => {
            // The harness verdict is only visible on the outcome report that
            // closes the Test stage.
            let ahead = events[i + 1..]
                .iter()
                .take_while(|e| !matches!(e.kind, EventKind::StageExited { .. }))
                .find_map(|e| match e.kind {
                    EventKind::TestOutcomeReported { harness_passed, .. } => Some(harness_passed),
                    _ => None,
                })
                .flatten();
            let mut verdicts = vec![ahead, None, Some(true), Some(false)];
            verdicts.dedup();
            verdicts
                .into_iter()
                .map(|harness_passed| TransitionEvent::RunCompleted {
                    snapshot: snapshot.clone(),
                    harness_passed,
                })
                .collect()
        }
        EventKind::ProgramEdited { new_text } => {
            let text = match events.get(i + 1).map(|e| &e.kind) {
                Some(EventKind::ResponseSubmitted { text, .. }) => text.clone(),
                _ => String::new(),
            };
            vec![TransitionEvent::SubmitFix {
                program: new_text.clone(),
                text,
            }]
        }
        EventKind::LineSelected { line, .. } => vec![TransitionEvent::SelectLine { line: *line }],
        EventKind::TestOutcomeReported {
            self_report,
            next_choice,
            ..
        } => vec![TransitionEvent::ReportOutcome {
            success: *self_report,
            next: *next_choice,
        }],
        EventKind::StageExited { .. } => vec![
            TransitionEvent::SubmitResponse { text: String::new() },
            TransitionEvent::ReturnToInspect,
            TransitionEvent::ChooseExtension {
                choice: ExtensionChoice::Make,
            },
            TransitionEvent::ChooseExtension {
                choice: ExtensionChoice::Finish,
            },
        ],
        _ => Vec::new(),
    }
}

fn kinds(events: &[SessionEvent]) -> impl Iterator<Item = &EventKind> {
    events.iter().map(|e| &e.kind)
}

pub fn replay(events: &[SessionEvent], challenge: &Challenge) -> Result<Replay, ReplayError> {
    if let Some(first) = events.first() {
        if first.challenge_id != challenge.id {
            return Err(ReplayError::WrongChallenge {
                expected: challenge.id.clone(),
                found: first.challenge_id.clone(),
            });
        }
    }
    let opening = SessionState::start(challenge);
    let n = opening.events.len();
    if events.len() < n || !kinds(&events[..n]).eq(opening.events.iter()) {
        return Err(ReplayError::BadOpening);
    }

    let mut state = opening.state;
    let mut stage_sequence = vec![state.stage];
    let mut commands = Vec::new();
    let mut abandoned = false;
    let mut i = n;
    while i < events.len() {
        if let EventKind::SessionEnded {
            reason: EndReason::Abandoned,
        } = events[i].kind
        {
            if i + 1 == events.len() && !state.is_finished() {
                abandoned = true;
                break;
            }
        }
        let accepted = candidates(events, i).into_iter().find_map(|cmd| {
            let t = advance(&state, &cmd, challenge).ok()?;
            let end = i + t.events.len();
            (!t.events.is_empty() && end <= events.len() && kinds(&events[i..end]).eq(t.events.iter()))
                .then_some((cmd, t))
        });
        let Some((cmd, t)) = accepted else {
            return Err(ReplayError::Diverged {
                index: i,
                kind: events[i].kind.name(),
            });
        };
        stage_sequence.extend(t.events.iter().filter_map(|e| match e {
            EventKind::StageEntered { stage, .. } => Some(*stage),
            _ => None,
        }));
        i += t.events.len();
        state = t.state;
        commands.push(cmd);
    }

    Ok(Replay {
        state,
        stage_sequence,
        commands,
        abandoned,
    })
}
