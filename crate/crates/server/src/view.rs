//! What the browser is allowed to see of a session.
//!
//! Built field by field from the state and the challenge so nothing
//! answer-bearing (error lines, exposure annotations, hints not yet earned)
//! can slip through by accident.

use primmdebug_core::prompts::{self, ARTICULATION_RULE, FIND_MISSED_ADVICE, TEST_FAILED_ADVICE};
use primmdebug_core::runner::{CaseResult, ExitStatus, HarnessResult, RunResult};
use primmdebug_core::stage::cycle_count;
use primmdebug_core::{Challenge, SessionState, Stage, StagePolicy};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TestCaseRow {
    pub index: usize,
    pub inputs: Vec<String>,
    pub expected_output: String,
    pub predicted_output: Option<String>,
    pub actual_output: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionHandle {
    pub session_id: String,
    pub challenge_id: String,
    pub title: String,
    pub description: String,
    pub stage: Stage,
    pub iteration: u32,
    pub policy: StagePolicy,
    pub prompt: String,
    pub advice: Option<&'static str>,
    pub articulation_rule: &'static str,
    /// Index of the test case the current Predict/Run cycle is about.
    pub test_case_cursor: usize,
    pub cycle_count: usize,
    pub test_cases: Vec<TestCaseRow>,
    pub hints: Vec<String>,
    pub hypotheses: Vec<String>,
    pub program: String,
    pub line_count: usize,
    /// Find the Error takes a line number rather than prose.
    pub line_select: bool,
    /// Spot the Defect may go straight to Find the Error.
    pub can_skip_inspect: bool,
    /// Harness verdict of the latest run, only while in Test.
    pub harness_passed: Option<bool>,
    pub find_attempts: u32,
    pub fix_attempts: u32,
    pub completed: bool,
    pub finished: bool,
    /// Events for this session are being recorded.
    pub logging: bool,
}

fn prompt(state: &SessionState, challenge: &Challenge) -> String {
    match state.stage {
        Stage::FindTheError if !challenge.error_spec.single_line => prompts::FIND_MULTI_LINE_PROMPT.to_string(),
        Stage::Modify => challenge
            .modify_prompt
            .clone()
            .unwrap_or_else(|| prompts::stage_prompt(Stage::Modify).to_string()),
        stage => prompts::stage_prompt(stage).to_string(),
    }
}

fn advice(state: &SessionState) -> Option<&'static str> {
    match state.stage {
        Stage::FindTheError if state.last_line_correct == Some(false) => Some(FIND_MISSED_ADVICE),
        Stage::InspectTheCode | Stage::FixTheError if state.fix_attempts > 0 => Some(TEST_FAILED_ADVICE),
        _ => None,
    }
}

pub fn session_handle(session_id: &str, state: &SessionState, challenge: &Challenge, logging: bool) -> SessionHandle {
    // During the Predict/Run cycles only cases reached so far are shown.
    let shown = match state.stage {
        Stage::Predict | Stage::Run => state.test_case_cursor + 1,
        _ => challenge.test_cases.len(),
    };
    let test_cases = challenge
        .test_cases
        .iter()
        .take(shown)
        .enumerate()
        .map(|(index, case)| TestCaseRow {
            index,
            inputs: case.inputs.clone(),
            expected_output: case.expected_output.clone(),
            predicted_output: state.predictions.get(index).cloned(),
            actual_output: state.observed_outputs.get(index).cloned(),
        })
        .collect();
    SessionHandle {
        session_id: session_id.to_string(),
        challenge_id: challenge.id.clone(),
        title: challenge.title.clone(),
        description: challenge.description.clone(),
        stage: state.stage,
        iteration: state.iteration(state.stage),
        policy: state.policy(),
        prompt: prompt(state, challenge),
        advice: advice(state),
        articulation_rule: ARTICULATION_RULE,
        test_case_cursor: state.test_case_cursor,
        cycle_count: cycle_count(challenge),
        test_cases,
        hints: state.visible_hints(challenge).into_iter().map(String::from).collect(),
        hypotheses: state.hypotheses.clone(),
        program: state.working_program.clone(),
        line_count: challenge.line_count(),
        line_select: state.stage == Stage::FindTheError && challenge.error_spec.single_line,
        can_skip_inspect: state.stage == Stage::SpotTheDefect && challenge.syntax_error_flag,
        harness_passed: (state.stage == Stage::Test).then_some(state.test_harness_passed).flatten(),
        find_attempts: state.find_attempts,
        fix_attempts: state.fix_attempts,
        completed: state.completed,
        finished: state.is_finished(),
        logging,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunView {
    pub stdin_lines: Vec<String>,
    pub stdout: String,
    pub stderr: String,
    pub error_message: Option<String>,
    pub exit_status: ExitStatus,
    pub duration: f64,
}

impl RunView {
    pub fn new(stdin_lines: Vec<String>, r: RunResult) -> Self {
        RunView {
            stdin_lines,
            stdout: r.stdout,
            stderr: r.stderr,
            error_message: r.error_message,
            exit_status: r.exit_status,
            duration: r.duration,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseView {
    pub inputs: Vec<String>,
    pub expected_output: String,
    pub actual_output: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessView {
    pub all_passed: bool,
    pub cases: Vec<CaseView>,
}

impl From<HarnessResult> for HarnessView {
    fn from(h: HarnessResult) -> Self {
        HarnessView {
            all_passed: h.all_passed,
            cases: h
                .per_case
                .into_iter()
                .map(|c: CaseResult| CaseView {
                    inputs: c.inputs,
                    expected_output: c.expected_output,
                    actual_output: c.actual_output,
                    passed: c.passed,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmitOutcome {
    pub session: SessionHandle,
    /// Hint revealed by this action, if any.
    pub new_hint: Option<String>,
    /// Result of a line selection.
    pub line_correct: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub run: RunView,
    /// Present for runs made in the Test stage.
    pub harness: Option<HarnessView>,
    pub session: SessionHandle,
}
