//! The PRIMMDebug stage graph.
//!
//! A session moves through Predict/Run cycles (one per test case), then the
//! SIFFT core (Spot the Defect, Inspect the Code, Find the Error, Fix the
//! Error, Test) and optionally Modify and Make. Every stage carries a fixed
//! [`StagePolicy`] saying whether the program may be run or edited and what
//! kind of written response is expected.
//!
//! [`advance`] is a pure function: it takes a state and an event and returns
//! the next state plus the log events the step produced. Nothing here touches
//! the filesystem or runs code; running is done by the caller, which then
//! feeds the result back in as [`TransitionEvent::RunCompleted`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::challenge::Challenge;
use crate::error::TransitionError;
use crate::session_log::{EndReason, EventKind, RunSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Predict,
    Run,
    SpotTheDefect,
    InspectTheCode,
    FindTheError,
    FixTheError,
    Test,
    Modify,
    Make,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Predict,
        Stage::Run,
        Stage::SpotTheDefect,
        Stage::InspectTheCode,
        Stage::FindTheError,
        Stage::FixTheError,
        Stage::Test,
        Stage::Modify,
        Stage::Make,
    ];

    /// Spot, Inspect, Find, Fix, Test.
    pub const SIFFT: [Stage; 5] = [
        Stage::SpotTheDefect,
        Stage::InspectTheCode,
        Stage::FindTheError,
        Stage::FixTheError,
        Stage::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Predict => "Predict",
            Stage::Run => "Run",
            Stage::SpotTheDefect => "SpotTheDefect",
            Stage::InspectTheCode => "InspectTheCode",
            Stage::FindTheError => "FindTheError",
            Stage::FixTheError => "FixTheError",
            Stage::Test => "Test",
            Stage::Modify => "Modify",
            Stage::Make => "Make",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.as_str() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseRequirement {
    Required,
    Optional,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    FreeText,
    LineSelectOrFreeText,
    SelfReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePolicy {
    pub can_run: bool,
    pub can_edit: bool,
    pub response: ResponseRequirement,
    pub response_kind: ResponseKind,
}

const fn p(can_run: bool, can_edit: bool, response: ResponseRequirement, response_kind: ResponseKind) -> StagePolicy {
    StagePolicy {
        can_run,
        can_edit,
        response,
        response_kind,
    }
}

/// The fixed run/edit/response table. Modify and Make are the only stages
/// where the program can be both run and edited.
pub const fn policy(stage: Stage) -> StagePolicy {
    use ResponseKind::*;
    use ResponseRequirement::*;
    match stage {
        Stage::Predict => p(false, false, Required, FreeText),
        Stage::Run => p(true, false, None, FreeText),
        Stage::SpotTheDefect => p(false, false, Required, FreeText),
        Stage::InspectTheCode => p(true, false, Optional, FreeText),
        Stage::FindTheError => p(false, false, Required, LineSelectOrFreeText),
        Stage::FixTheError => p(false, true, Required, FreeText),
        Stage::Test => p(true, false, Required, SelfReport),
        Stage::Modify => p(true, true, Optional, FreeText),
        Stage::Make => p(true, true, None, FreeText),
    }
}

/// A response passes if it contains at least one letter or number.
pub fn validate_articulation(text: &str) -> bool {
    text.chars().any(char::is_alphanumeric)
}

/// Where to go after reporting a Test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextChoice {
    /// Failure: refine hypotheses first (the recommended path).
    Inspect,
    /// Failure: try another fix straight away.
    RetryFix,
    Modify,
    Make,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionChoice {
    Make,
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransitionEvent {
    SubmitResponse {
        text: String,
    },
    /// Permission probe; succeeds without effect when the stage allows running.
    RunRequested,
    RunCompleted {
        snapshot: RunSnapshot,
        /// Harness verdict for runs made in the Test stage.
        harness_passed: Option<bool>,
    },
    SelectLine {
        line: u32,
    },
    SubmitFix {
        program: String,
        text: String,
    },
    ReportOutcome {
        success: bool,
        next: NextChoice,
    },
    /// Spot the Defect straight to Find the Error; syntax-error challenges only.
    SkipInspect {
        text: String,
    },
    /// Back from Find the Error after a wrong line selection.
    ReturnToInspect,
    ChooseExtension {
        choice: ExtensionChoice,
    },
}

impl TransitionEvent {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionEvent::SubmitResponse { .. } => "SubmitResponse",
            TransitionEvent::RunRequested => "RunRequested",
            TransitionEvent::RunCompleted { .. } => "RunCompleted",
            TransitionEvent::SelectLine { .. } => "SelectLine",
            TransitionEvent::SubmitFix { .. } => "SubmitFix",
            TransitionEvent::ReportOutcome { .. } => "ReportOutcome",
            TransitionEvent::SkipInspect { .. } => "SkipInspect",
            TransitionEvent::ReturnToInspect => "ReturnToInspect",
            TransitionEvent::ChooseExtension { .. } => "ChooseExtension",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub challenge_id: String,
    pub stage: Stage,
    /// Which test case the current Predict/Run cycle is about.
    pub test_case_cursor: usize,
    pub working_program: String,
    pub original_program: String,
    /// Predict responses, one per cycle.
    pub predictions: Vec<String>,
    /// stdout of the Run-stage run, one per cycle.
    pub observed_outputs: Vec<String>,
    /// Inspect the Code responses.
    pub hypotheses: Vec<String>,
    /// Incorrect line selections.
    pub find_attempts: u32,
    /// Test stages that ended in a reported failure.
    pub fix_attempts: u32,
    pub hints_shown: u32,
    pub completed: bool,
    pub finished_at_stage: Option<Stage>,
    /// Entries per stage, indexed by [`Stage::index`].
    pub iterations: [u32; 9],
    pub last_line_correct: Option<bool>,
    /// Verdict of the most recent harness run in the current Test stage.
    pub test_harness_passed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SessionState,
    pub events: Vec<EventKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Localisation {
    Correct,
    IncorrectWithHint { hint: String },
}

/// Predict/Run cycles for a challenge: one per test case, or a single cycle
/// when the challenge has none.
pub fn cycle_count(challenge: &Challenge) -> usize {
    challenge.test_cases.len().max(1)
}

impl SessionState {
    /// A fresh session at Predict, plus its opening log events.
    pub fn start(challenge: &Challenge) -> Transition {
        let mut state = SessionState {
            challenge_id: challenge.id.clone(),
            stage: Stage::Predict,
            test_case_cursor: 0,
            working_program: challenge.program.clone(),
            original_program: challenge.program.clone(),
            predictions: Vec::new(),
            observed_outputs: Vec::new(),
            hypotheses: Vec::new(),
            find_attempts: 0,
            fix_attempts: 0,
            hints_shown: 0,
            completed: false,
            finished_at_stage: None,
            iterations: [0; 9],
            last_line_correct: None,
            test_harness_passed: None,
        };
        let mut events = vec![EventKind::SessionStarted {}];
        state.enter(Stage::Predict, &mut events);
        Transition { state, events }
    }

    pub fn policy(&self) -> StagePolicy {
        policy(self.stage)
    }

    pub fn is_finished(&self) -> bool {
        self.finished_at_stage.is_some()
    }

    pub fn iteration(&self, stage: Stage) -> u32 {
        self.iterations[stage.index()]
    }

    /// Hints unlocked so far. Clamped to the authored list; a challenge
    /// without hints shows the generic fallback once any hint is earned.
    pub fn visible_hints<'a>(&self, challenge: &'a Challenge) -> Vec<&'a str> {
        if self.hints_shown == 0 {
            return Vec::new();
        }
        if challenge.hints.is_empty() {
            return vec![crate::prompts::FALLBACK_HINT];
        }
        let n = (self.hints_shown as usize).min(challenge.hints.len());
        challenge.hints[..n].iter().map(String::as_str).collect()
    }

    fn enter(&mut self, stage: Stage, events: &mut Vec<EventKind>) {
        self.stage = stage;
        let slot = &mut self.iterations[stage.index()];
        *slot += 1;
        if stage == Stage::Test {
            self.test_harness_passed = None;
        }
        events.push(EventKind::StageEntered {
            stage,
            iteration: *slot,
        });
    }

    fn move_to(&mut self, next: Stage, events: &mut Vec<EventKind>) {
        events.push(EventKind::StageExited { stage: self.stage });
        self.enter(next, events);
    }

    fn finish(&mut self, events: &mut Vec<EventKind>) {
        events.push(EventKind::StageExited { stage: self.stage });
        events.push(EventKind::SessionEnded {
            reason: EndReason::Finished,
        });
        self.finished_at_stage = Some(self.stage);
    }

    fn reveal_hint(&mut self, challenge: &Challenge, events: &mut Vec<EventKind>) {
        self.hints_shown += 1;
        events.push(EventKind::HintShown {
            index: hint_index(self.hints_shown, challenge),
        });
    }
}

/// Index of the most recently revealed hint, clamped to the last hint.
fn hint_index(hints_shown: u32, challenge: &Challenge) -> usize {
    let last = challenge.hints.len().saturating_sub(1);
    (hints_shown.saturating_sub(1) as usize).min(last)
}

fn illegal(stage: Stage, event: &TransitionEvent) -> TransitionError {
    TransitionError::IllegalEvent {
        stage,
        event: event.name(),
    }
}

/// Checks a Find the Error line selection without changing the state.
///
/// On a miss the returned hint is the one the next render will show.
pub fn check_localisation(
    state: &SessionState,
    challenge: &Challenge,
    line: u32,
) -> Result<Localisation, TransitionError> {
    let Some(error_line) = challenge.error_line() else {
        return Err(illegal(state.stage, &TransitionEvent::SelectLine { line }));
    };
    if state.stage != Stage::FindTheError || state.is_finished() {
        return Err(illegal(state.stage, &TransitionEvent::SelectLine { line }));
    }
    let line_count = challenge.line_count();
    if line == 0 || line as usize > line_count {
        return Err(TransitionError::OutOfRange { line, line_count });
    }
    if line == error_line {
        Ok(Localisation::Correct)
    } else {
        let hint = challenge.hint_at(hint_index(state.hints_shown + 1, challenge));
        Ok(Localisation::IncorrectWithHint {
            hint: hint.to_string(),
        })
    }
}

/// Applies one event. On error the input state is untouched.
pub fn advance(
    state: &SessionState,
    event: &TransitionEvent,
    challenge: &Challenge,
) -> Result<Transition, TransitionError> {
    if state.is_finished() {
        return Err(TransitionError::SessionFinished);
    }
    let stage = state.stage;
    let pol = policy(stage);
    let mut next = state.clone();
    let mut events = Vec::new();

    match event {
        TransitionEvent::RunRequested => {
            if !pol.can_run {
                return Err(TransitionError::RunRejected(stage));
            }
        }

        TransitionEvent::RunCompleted {
            snapshot,
            harness_passed,
        } => {
            if !pol.can_run {
                return Err(TransitionError::RunRejected(stage));
            }
            events.push(EventKind::ProgramRun(snapshot.clone()));
            match stage {
                Stage::Run => {
                    let cursor = next.test_case_cursor;
                    next.observed_outputs.truncate(cursor);
                    next.observed_outputs.push(snapshot.stdout.clone());
                    if cursor + 1 < cycle_count(challenge) {
                        next.test_case_cursor += 1;
                        next.move_to(Stage::Predict, &mut events);
                    } else {
                        next.move_to(Stage::SpotTheDefect, &mut events);
                    }
                }
                Stage::Test => next.test_harness_passed = *harness_passed,
                _ => {}
            }
        }

        TransitionEvent::SubmitResponse { text } => {
            let blank = text.trim().is_empty();
            match pol.response {
                ResponseRequirement::None => return Err(illegal(stage, event)),
                ResponseRequirement::Required if !validate_articulation(text) => {
                    // Stages that take their response through another event
                    // reject plain responses outright.
                    if matches!(stage, Stage::FixTheError | Stage::Test)
                        || (stage == Stage::FindTheError && challenge.error_spec.single_line)
                    {
                        return Err(illegal(stage, event));
                    }
                    return Err(TransitionError::ArticulationRejected);
                }
                _ => {}
            }
            let respond = |events: &mut Vec<EventKind>| {
                events.push(EventKind::ResponseSubmitted {
                    stage,
                    text: text.clone(),
                })
            };
            match stage {
                Stage::Predict => {
                    let cursor = next.test_case_cursor;
                    next.predictions.truncate(cursor);
                    next.predictions.push(text.clone());
                    respond(&mut events);
                    next.move_to(Stage::Run, &mut events);
                }
                Stage::SpotTheDefect => {
                    respond(&mut events);
                    next.move_to(Stage::InspectTheCode, &mut events);
                }
                Stage::InspectTheCode => {
                    if !blank {
                        next.hypotheses.push(text.clone());
                        respond(&mut events);
                    }
                    next.move_to(Stage::FindTheError, &mut events);
                }
                // Errors spread over several lines are located in prose and
                // not checked.
                Stage::FindTheError if !challenge.error_spec.single_line => {
                    respond(&mut events);
                    next.move_to(Stage::FixTheError, &mut events);
                }
                Stage::Modify => {
                    if !blank {
                        respond(&mut events);
                    }
                    next.move_to(Stage::Make, &mut events);
                }
                _ => return Err(illegal(stage, event)),
            }
        }

        TransitionEvent::SelectLine { line } => {
            match check_localisation(state, challenge, *line)? {
                Localisation::Correct => {
                    next.last_line_correct = Some(true);
                    events.push(EventKind::LineSelected {
                        line: *line,
                        correct: true,
                    });
                    next.move_to(Stage::FixTheError, &mut events);
                }
                Localisation::IncorrectWithHint { .. } => {
                    next.last_line_correct = Some(false);
                    next.find_attempts += 1;
                    events.push(EventKind::LineSelected {
                        line: *line,
                        correct: false,
                    });
                    next.reveal_hint(challenge, &mut events);
                }
            }
        }

        TransitionEvent::ReturnToInspect => {
            if stage != Stage::FindTheError || state.last_line_correct != Some(false) {
                return Err(illegal(stage, event));
            }
            next.move_to(Stage::InspectTheCode, &mut events);
        }

        TransitionEvent::SubmitFix { program, text } => {
            if !pol.can_edit {
                return Err(TransitionError::EditRejected(stage));
            }
            match stage {
                Stage::FixTheError => {
                    if !validate_articulation(text) {
                        return Err(TransitionError::ArticulationRejected);
                    }
                    next.working_program = program.clone();
                    events.push(EventKind::ProgramEdited {
                        new_text: program.clone(),
                    });
                    events.push(EventKind::ResponseSubmitted {
                        stage,
                        text: text.clone(),
                    });
                    next.move_to(Stage::Test, &mut events);
                }
                Stage::Modify => {
                    next.working_program = program.clone();
                    events.push(EventKind::ProgramEdited {
                        new_text: program.clone(),
                    });
                    if !text.trim().is_empty() {
                        events.push(EventKind::ResponseSubmitted {
                            stage,
                            text: text.clone(),
                        });
                    }
                }
                _ => {
                    next.working_program = program.clone();
                    events.push(EventKind::ProgramEdited {
                        new_text: program.clone(),
                    });
                }
            }
        }

        TransitionEvent::SkipInspect { text } => {
            if stage != Stage::SpotTheDefect || !challenge.syntax_error_flag {
                return Err(illegal(stage, event));
            }
            if !validate_articulation(text) {
                return Err(TransitionError::ArticulationRejected);
            }
            events.push(EventKind::ResponseSubmitted {
                stage,
                text: text.clone(),
            });
            next.move_to(Stage::FindTheError, &mut events);
        }

        TransitionEvent::ReportOutcome { success, next: choice } => {
            if stage != Stage::Test {
                return Err(illegal(stage, event));
            }
            let compatible = match choice {
                NextChoice::Inspect | NextChoice::RetryFix => !success,
                NextChoice::Modify | NextChoice::Make | NextChoice::Finish => *success,
            };
            if !compatible {
                return Err(illegal(stage, event));
            }
            events.push(EventKind::TestOutcomeReported {
                self_report: *success,
                harness_passed: state.test_harness_passed,
                next_choice: *choice,
            });
            if *success {
                next.completed = true;
            } else {
                next.fix_attempts += 1;
                next.working_program = next.original_program.clone();
                next.reveal_hint(challenge, &mut events);
            }
            match choice {
                NextChoice::Inspect => next.move_to(Stage::InspectTheCode, &mut events),
                NextChoice::RetryFix => next.move_to(Stage::FixTheError, &mut events),
                NextChoice::Modify => next.move_to(Stage::Modify, &mut events),
                NextChoice::Make => next.move_to(Stage::Make, &mut events),
                NextChoice::Finish => next.finish(&mut events),
            }
        }

        TransitionEvent::ChooseExtension { choice } => match (stage, choice) {
            (Stage::Modify, ExtensionChoice::Make) => next.move_to(Stage::Make, &mut events),
            (Stage::Modify | Stage::Make, ExtensionChoice::Finish) => next.finish(&mut events),
            _ => return Err(illegal(stage, event)),
        },
    }

    Ok(Transition {
        state: next,
        events,
    })
}

/// Replaces the working program in the Fix, Modify or Make stage.
pub fn apply_fix(
    state: &SessionState,
    challenge: &Challenge,
    new_program: &str,
    description: &str,
) -> Result<Transition, TransitionError> {
    advance(
        state,
        &TransitionEvent::SubmitFix {
            program: new_program.to_string(),
            text: description.to_string(),
        },
        challenge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::challenge::parse_challenge;

    fn number_timeline() -> Challenge {
        parse_challenge(include_str!("../../../challenges/number-timeline.json")).unwrap()
    }

    fn swap() -> Challenge {
        parse_challenge(include_str!("../../../challenges/swap-numbers.json")).unwrap()
    }

    fn snap(program: &str, stdout: &str) -> RunSnapshot {
        RunSnapshot {
            program: program.to_string(),
            stdin: vec![],
            stdout: stdout.to_string(),
            stderr: String::new(),
            error_message: None,
        }
    }

    fn step(state: &SessionState, ev: TransitionEvent, c: &Challenge) -> SessionState {
        advance(state, &ev, c).unwrap().state
    }

    fn respond(text: &str) -> TransitionEvent {
        TransitionEvent::SubmitResponse { text: text.into() }
    }

    fn ran(state: &SessionState) -> TransitionEvent {
        TransitionEvent::RunCompleted {
            snapshot: snap(&state.working_program, ""),
            harness_passed: None,
        }
    }

    /// Drives Number Timeline up to Find the Error.
    fn at_find(c: &Challenge) -> SessionState {
        let mut s = SessionState::start(c).state;
        for _ in 0..c.test_cases.len() {
            s = step(&s, respond("a guess"), c);
            s = step(&s, ran(&s), c);
        }
        s = step(&s, respond("30 is missing"), c);
        step(&s, respond(""), c)
    }

    #[test]
    fn policy_examples() {
        let fix = policy(Stage::FixTheError);
        assert!(fix.can_edit && !fix.can_run);
        let modify = policy(Stage::Modify);
        assert!(modify.can_edit && modify.can_run);
        assert_eq!(
            policy(Stage::InspectTheCode).response,
            ResponseRequirement::Optional
        );
    }

    #[test]
    fn articulation_examples() {
        assert!(validate_articulation("the range stops at B"));
        assert!(!validate_articulation("!!! ... ???"));
        assert!(validate_articulation("7"));
        assert!(!validate_articulation(""));
        assert!(validate_articulation("é"));
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.as_str()), Some(s));
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
    }

    #[test]
    fn predict_moves_to_run_on_same_case() {
        let c = number_timeline();
        let s = SessionState::start(&c).state;
        let t = advance(&s, &respond("prints 25 to 29"), &c).unwrap();
        assert_eq!(t.state.stage, Stage::Run);
        assert_eq!(t.state.test_case_cursor, 0);
    }

    #[test]
    fn run_cycles_then_spot() {
        let c = number_timeline();
        let mut s = SessionState::start(&c).state;
        s = step(&s, respond("x"), &c);
        s = step(&s, ran(&s), &c);
        assert_eq!((s.stage, s.test_case_cursor), (Stage::Predict, 1));
        s = step(&s, respond("y"), &c);
        s = step(&s, ran(&s), &c);
        assert_eq!(s.stage, Stage::SpotTheDefect);
        assert_eq!(s.iteration(Stage::Predict), 2);
        assert_eq!(s.iteration(Stage::Run), 2);
    }

    #[test]
    fn no_test_cases_means_one_cycle() {
        let mut c = number_timeline();
        c.test_cases.clear();
        let mut s = SessionState::start(&c).state;
        s = step(&s, respond("x"), &c);
        s = step(&s, ran(&s), &c);
        assert_eq!(s.stage, Stage::SpotTheDefect);
    }

    #[test]
    fn empty_response_rejected_at_predict() {
        let c = number_timeline();
        let s = SessionState::start(&c).state;
        assert_eq!(
            advance(&s, &respond(""), &c).unwrap_err(),
            TransitionError::ArticulationRejected
        );
    }

    #[test]
    fn run_rejected_where_policy_forbids() {
        let c = number_timeline();
        let s = SessionState::start(&c).state;
        assert_eq!(
            advance(&s, &TransitionEvent::RunRequested, &c).unwrap_err(),
            TransitionError::RunRejected(Stage::Predict)
        );
    }

    #[test]
    fn correct_line_unlocks_fix() {
        let c = number_timeline();
        let s = at_find(&c);
        assert_eq!(check_localisation(&s, &c, 6).unwrap(), Localisation::Correct);
        let s = step(&s, TransitionEvent::SelectLine { line: 6 }, &c);
        assert_eq!(s.stage, Stage::FixTheError);
        assert_eq!(s.find_attempts, 0);
    }

    #[test]
    fn wrong_line_gives_hint_and_stays() {
        let c = number_timeline();
        let s = at_find(&c);
        match check_localisation(&s, &c, 3).unwrap() {
            Localisation::IncorrectWithHint { hint } => assert_eq!(hint, c.hints[0]),
            other => panic!("{other:?}"),
        }
        let t = advance(&s, &TransitionEvent::SelectLine { line: 3 }, &c).unwrap();
        assert_eq!(t.state.stage, Stage::FindTheError);
        assert_eq!(t.state.find_attempts, 1);
        assert_eq!(t.state.visible_hints(&c), vec![c.hints[0].as_str()]);
        assert!(t.events.contains(&EventKind::HintShown { index: 0 }));
    }

    #[test]
    fn line_zero_out_of_range() {
        let c = number_timeline();
        let s = at_find(&c);
        assert_eq!(
            advance(&s, &TransitionEvent::SelectLine { line: 0 }, &c).unwrap_err(),
            TransitionError::OutOfRange {
                line: 0,
                line_count: 7
            }
        );
    }

    #[test]
    fn return_to_inspect_only_after_miss() {
        let c = number_timeline();
        let s = at_find(&c);
        assert!(advance(&s, &TransitionEvent::ReturnToInspect, &c).is_err());
        let s = step(&s, TransitionEvent::SelectLine { line: 2 }, &c);
        let s = step(&s, TransitionEvent::ReturnToInspect, &c);
        assert_eq!(s.stage, Stage::InspectTheCode);
        assert_eq!(s.visible_hints(&c).len(), 1);
    }

    #[test]
    fn hints_clamp_to_last() {
        let c = number_timeline();
        let mut s = at_find(&c);
        for _ in 0..5 {
            s = step(&s, TransitionEvent::SelectLine { line: 1 }, &c);
        }
        assert_eq!(s.hints_shown, 5);
        assert_eq!(s.visible_hints(&c).len(), c.hints.len());
        let t = advance(&s, &TransitionEvent::SelectLine { line: 1 }, &c).unwrap();
        assert!(t.events.contains(&EventKind::HintShown {
            index: c.hints.len() - 1
        }));
    }

    #[test]
    fn multi_line_find_accepts_any_articulated_response() {
        let c = swap();
        let mut s = at_find(&c);
        assert!(advance(&s, &TransitionEvent::SelectLine { line: 3 }, &c).is_err());
        assert_eq!(
            advance(&s, &respond("??"), &c).unwrap_err(),
            TransitionError::ArticulationRejected
        );
        s = step(&s, respond("lines 3 and 4 lose a"), &c);
        assert_eq!(s.stage, Stage::FixTheError);
    }

    #[test]
    fn fix_then_failed_test_resets_program() {
        let c = number_timeline();
        let s = at_find(&c);
        let s = step(&s, TransitionEvent::SelectLine { line: 6 }, &c);
        let fixed = c.program.replace("range(A, B)", "range(A, B+1)");
        let s = apply_fix(&s, &c, &fixed, "added +1 to range end").unwrap().state;
        assert_eq!(s.stage, Stage::Test);
        assert_eq!(s.working_program, fixed);
        let t = advance(
            &s,
            &TransitionEvent::ReportOutcome {
                success: false,
                next: NextChoice::RetryFix,
            },
            &c,
        )
        .unwrap();
        assert_eq!(t.state.stage, Stage::FixTheError);
        assert_eq!(t.state.working_program, c.program);
        assert_eq!((t.state.fix_attempts, t.state.hints_shown), (1, 1));
    }

    #[test]
    fn fix_requires_description_but_allows_no_diff() {
        let c = number_timeline();
        let s = step(&at_find(&c), TransitionEvent::SelectLine { line: 6 }, &c);
        assert_eq!(
            apply_fix(&s, &c, &c.program, "").unwrap_err(),
            TransitionError::ArticulationRejected
        );
        let t = apply_fix(&s, &c, &c.program, "changed nothing").unwrap();
        assert_eq!(t.state.stage, Stage::Test);
        assert!(t.events.contains(&EventKind::ProgramEdited {
            new_text: c.program.clone()
        }));
    }

    #[test]
    fn edit_rejected_outside_edit_stages() {
        let c = number_timeline();
        let s = at_find(&c);
        assert_eq!(
            apply_fix(&s, &c, "print(1)", "x").unwrap_err(),
            TransitionError::EditRejected(Stage::FindTheError)
        );
    }

    #[test]
    fn success_branches_and_finish() {
        let c = number_timeline();
        let s = step(&at_find(&c), TransitionEvent::SelectLine { line: 6 }, &c);
        let s = apply_fix(&s, &c, &c.program, "x").unwrap().state;
        assert!(advance(
            &s,
            &TransitionEvent::ReportOutcome {
                success: true,
                next: NextChoice::Inspect
            },
            &c
        )
        .is_err());
        let m = step(
            &s,
            TransitionEvent::ReportOutcome {
                success: true,
                next: NextChoice::Modify,
            },
            &c,
        );
        assert!(m.completed);
        assert_eq!(m.stage, Stage::Modify);
        let mk = step(&m, respond(""), &c);
        assert_eq!(mk.stage, Stage::Make);
        let t = advance(
            &mk,
            &TransitionEvent::ChooseExtension {
                choice: ExtensionChoice::Finish,
            },
            &c,
        )
        .unwrap();
        assert!(t.state.is_finished());
        assert_eq!(
            advance(&t.state, &respond("x"), &c).unwrap_err(),
            TransitionError::SessionFinished
        );
    }

    #[test]
    fn skip_inspect_needs_syntax_flag() {
        let mut c = number_timeline();
        let mut s = SessionState::start(&c).state;
        for _ in 0..2 {
            s = step(&s, respond("x"), &c);
            s = step(&s, ran(&s), &c);
        }
        let skip = TransitionEvent::SkipInspect { text: "missing 30".into() };
        assert!(advance(&s, &skip, &c).is_err());
        c.syntax_error_flag = true;
        assert_eq!(advance(&s, &skip, &c).unwrap().state.stage, Stage::FindTheError);
    }

    #[test]
    fn test_stage_logs_harness_and_self_report() {
        let c = number_timeline();
        let s = step(&at_find(&c), TransitionEvent::SelectLine { line: 6 }, &c);
        let s = apply_fix(&s, &c, &c.program, "no change").unwrap().state;
        let s = step(
            &s,
            TransitionEvent::RunCompleted {
                snapshot: snap(&c.program, ""),
                harness_passed: Some(false),
            },
            &c,
        );
        let t = advance(
            &s,
            &TransitionEvent::ReportOutcome {
                success: true,
                next: NextChoice::Finish,
            },
            &c,
        )
        .unwrap();
        assert_eq!(
            t.events[0],
            EventKind::TestOutcomeReported {
                self_report: true,
                harness_passed: Some(false),
                next_choice: NextChoice::Finish
            }
        );
    }
}
