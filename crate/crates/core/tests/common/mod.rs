#![allow(dead_code)]

use primmdebug_core::session_log::EndReason;
use primmdebug_core::stage::{advance, policy, ExtensionChoice, NextChoice, SessionState, TransitionEvent};
use primmdebug_core::{parse_challenge, Challenge, EventKind, RunSnapshot, SessionEvent, Stage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn load(id: &str) -> Challenge {
    let path = format!("{}/../../challenges/{id}.json", env!("CARGO_MANIFEST_DIR"));
    parse_challenge(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn all_challenges() -> Vec<Challenge> {
    ["number-timeline", "even-or-odd", "ticket-price", "swap-numbers", "sum-to-ten", "password-attempts"]
        .into_iter()
        .map(load)
        .collect()
}

pub fn snapshot(state: &SessionState) -> RunSnapshot {
    RunSnapshot {
        program: state.working_program.clone(),
        stdin: vec![],
        stdout: "out\n".into(),
        stderr: String::new(),
        error_message: None,
    }
}

pub fn step(state: &SessionState, ev: TransitionEvent, c: &Challenge) -> SessionState {
    advance(state, &ev, c).unwrap_or_else(|e| panic!("{:?} at {}: {e}", ev, state.stage)).state
}

/// Drives a fresh session to `target` along the main path.
pub fn reach(c: &Challenge, target: Stage) -> SessionState {
    let mut s = SessionState::start(c).state;
    let text = || TransitionEvent::SubmitResponse { text: "because".into() };
    while s.stage != target {
        let ev = match s.stage {
            Stage::Predict | Stage::SpotTheDefect | Stage::InspectTheCode => text(),
            Stage::Run => TransitionEvent::RunCompleted {
                snapshot: snapshot(&s),
                harness_passed: None,
            },
            Stage::FindTheError => match c.error_line() {
                Some(line) => TransitionEvent::SelectLine { line },
                None => text(),
            },
            Stage::FixTheError => TransitionEvent::SubmitFix {
                program: format!("{}# fixed\n", c.program),
                text: "changed it".into(),
            },
            Stage::Test => TransitionEvent::ReportOutcome {
                success: true,
                next: NextChoice::Modify,
            },
            Stage::Modify => TransitionEvent::ChooseExtension {
                choice: ExtensionChoice::Make,
            },
            Stage::Make => unreachable!("target not reachable"),
        };
        s = step(&s, ev, c);
    }
    s
}

pub const TEXTS: [&str; 6] = ["", "   ", "?!", "7", "the loop", "x"];

pub fn random_event(rng: &mut ChaCha8Rng, state: &SessionState, c: &Challenge) -> TransitionEvent {
    let text = TEXTS[rng.random_range(0..TEXTS.len())].to_string();
    match rng.random_range(0..10) {
        0 => TransitionEvent::SubmitResponse { text },
        1 => TransitionEvent::RunRequested,
        2 => TransitionEvent::RunCompleted {
            snapshot: snapshot(state),
            harness_passed: [None, Some(true), Some(false)][rng.random_range(0..3)],
        },
        3 => TransitionEvent::SelectLine {
            line: rng.random_range(0..=c.line_count() as u32 + 1),
        },
        4 => TransitionEvent::SubmitFix {
            program: format!("# edit {}\n{}", rng.random_range(0..100), c.program),
            text,
        },
        5 => TransitionEvent::ReportOutcome {
            success: rng.random_bool(0.5),
            next: [NextChoice::Inspect, NextChoice::RetryFix, NextChoice::Modify, NextChoice::Make, NextChoice::Finish]
                [rng.random_range(0..5)],
        },
        6 => TransitionEvent::SkipInspect { text },
        7 => TransitionEvent::ReturnToInspect,
        8 => TransitionEvent::ChooseExtension {
            choice: if rng.random_bool(0.5) {
                ExtensionChoice::Make
            } else {
                ExtensionChoice::Finish
            },
        },
        // Bias towards progress so walks reach the later stages.
        _ => match state.stage {
            Stage::FindTheError => TransitionEvent::SelectLine {
                line: c.error_line().unwrap_or(1),
            },
            Stage::Run | Stage::Test => TransitionEvent::RunCompleted {
                snapshot: snapshot(state),
                harness_passed: None,
            },
            _ => TransitionEvent::SubmitResponse { text: "progress".into() },
        },
    }
}

/// Random event sequences against every challenge. Panics on a run in a
/// no-run stage, an edit in a no-edit stage, a program not reset after a
/// failed test, or Fix reached without localising a single-line error.
/// Returns how often each stage was entered.
pub fn random_walks(sequences: usize, seed: u64) -> [usize; 9] {
    let challenges = all_challenges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages_seen = [0usize; 9];
    for seq in 0..sequences {
        let c = &challenges[seq % challenges.len()];
        let opening = SessionState::start(c);
        let mut state = opening.state;
        let mut stage = state.stage;
        let mut failure_since_edit = false;
        let mut located = false;
        let len = rng.random_range(1..80);
        for _ in 0..len {
            let ev = random_event(&mut rng, &state, c);
            let before = state.clone();
            let Ok(t) = advance(&state, &ev, c) else {
                continue;
            };
            for e in &t.events {
                match e {
                    EventKind::StageEntered { stage: s, .. } => {
                        stage = *s;
                        stages_seen[s.index()] += 1;
                        if *s == Stage::FixTheError && c.error_spec.single_line {
                            assert!(located, "Fix reached without a correct line selection");
                        }
                    }
                    EventKind::ProgramRun(_) => assert!(policy(stage).can_run, "run in {stage}"),
                    EventKind::ProgramEdited { .. } => {
                        assert!(policy(stage).can_edit, "edit in {stage}");
                        if failure_since_edit {
                            assert_eq!(before.working_program, before.original_program);
                        }
                        failure_since_edit = false;
                    }
                    EventKind::LineSelected { correct: true, .. } => located = true,
                    EventKind::TestOutcomeReported { self_report: false, .. } => failure_since_edit = true,
                    _ => {}
                }
            }
            if failure_since_edit {
                assert_eq!(t.state.working_program, t.state.original_program);
            }
            assert_eq!(t.state.stage, stage);
            state = t.state;
            if state.is_finished() {
                assert!(advance(&state, &TransitionEvent::RunRequested, c).is_err());
                break;
            }
        }
    }
    stages_seen
}

/// (text, has a letter or digit), labelled by hand.
pub const ARTICULATION_CORPUS: [(&str, bool); 50] = [
    ("", false),
    (" ", false),
    ("   ", false),
    ("\t", false),
    ("\n", false),
    (" \n\t ", false),
    ("?", false),
    ("!!!", false),
    ("...", false),
    ("?!", false),
    ("-", false),
    ("_", false),
    ("()", false),
    ("[]{}", false),
    ("+-*/", false),
    ("=", false),
    ("#", false),
    ("\"\"", false),
    ("''", false),
    (":)", false),
    ("\u{1F600}", false),
    ("\u{200B}", false),
    ("\u{2014}", false),
    ("\u{00A0}", false),
    ("@ # $ %", false),
    ("7", true),
    ("0", true),
    (" 7 ", true),
    ("a", true),
    ("Z", true),
    ("x?", true),
    ("?x", true),
    ("no idea", true),
    ("line 6", true),
    ("\u{00E9}", true),
    ("\u{00DF}", true),
    ("\u{65E5}\u{672C}", true),
    ("\u{0663}", true),
    ("\u{00B2}", true),
    ("\u{2166}", true),
    ("!!!1", true),
    ("...a...", true),
    ("\ta\n", true),
    ("i", true),
    ("the range stops at B", true),
    ("B+1", true),
    ("\u{1F600} yes", true),
    ("42", true),
    ("\u{0416}", true),
    ("\u{03C0}", true),
];

/// Tau-b by counting every pair.
pub fn tau_b_pairs(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
            let dy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx * dy > 0.0 {
                conc += 1;
            } else if dx * dy < 0.0 {
                disc += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if tx == n0 || ty == n0 {
        return None;
    }
    Some((conc - disc) as f64 / (((n0 - tx) * (n0 - ty)) as f64).sqrt())
}

/// G1 from k-statistics over power sums.
pub fn skew_k_stats(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let shift = xs[0];
    let (s1, s2, s3) = xs.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &x| {
        let d = x - shift;
        (a + d, b + d * d, c + d * d * d)
    });
    let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
    let k3 = (n * n * s3 - 3.0 * n * s2 * s1 + 2.0 * s1 * s1 * s1) / (n * (n - 1.0) * (n - 2.0));
    k3 / k2.powf(1.5)
}


/// Hand-built session logs.
pub struct LogBuilder {
    session_id: String,
    participant_id: Option<String>,
    challenge_id: String,
    ts_ms: u64,
    open: Option<Stage>,
    iterations: [u32; 9],
    pub events: Vec<SessionEvent>,
}

impl LogBuilder {
    pub fn new(session_id: &str, participant_id: &str, challenge_id: &str, start_ms: u64) -> Self {
        let mut b = LogBuilder {
            session_id: session_id.into(),
            participant_id: Some(participant_id.into()),
            challenge_id: challenge_id.into(),
            ts_ms: start_ms,
            open: None,
            iterations: [0; 9],
            events: Vec::new(),
        };
        b.push(EventKind::SessionStarted {});
        b
    }

    fn push(&mut self, kind: EventKind) -> &mut Self {
        self.events.push(SessionEvent {
            session_id: self.session_id.clone(),
            participant_id: self.participant_id.clone(),
            challenge_id: self.challenge_id.clone(),
            ts_ms: self.ts_ms,
            kind,
        });
        self
    }

    pub fn wait(&mut self, ms: u64) -> &mut Self {
        self.ts_ms += ms;
        self
    }

    /// Closes the open stage (if any) and enters `stage`.
    pub fn stage(&mut self, stage: Stage) -> &mut Self {
        if let Some(open) = self.open.take() {
            self.push(EventKind::StageExited { stage: open });
        }
        let slot = &mut self.iterations[stage.index()];
        *slot += 1;
        let iteration = *slot;
        self.open = Some(stage);
        self.push(EventKind::StageEntered { stage, iteration })
    }

    pub fn respond(&mut self, text: &str) -> &mut Self {
        let stage = self.open.expect("no open stage");
        self.push(EventKind::ResponseSubmitted { stage, text: text.into() })
    }

    pub fn run(&mut self, program: &str, stdin: &[&str]) -> &mut Self {
        self.push(EventKind::ProgramRun(RunSnapshot {
            program: program.into(),
            stdin: stdin.iter().map(|s| s.to_string()).collect(),
            stdout: String::new(),
            stderr: String::new(),
            error_message: None,
        }))
    }

    pub fn edit(&mut self, text: &str) -> &mut Self {
        self.push(EventKind::ProgramEdited { new_text: text.into() })
    }

    pub fn select(&mut self, line: u32, correct: bool) -> &mut Self {
        self.push(EventKind::LineSelected { line, correct })
    }

    pub fn hint(&mut self, index: usize) -> &mut Self {
        self.push(EventKind::HintShown { index })
    }

    pub fn report(&mut self, self_report: bool, harness_passed: Option<bool>, next_choice: NextChoice) -> &mut Self {
        self.push(EventKind::TestOutcomeReported {
            self_report,
            harness_passed,
            next_choice,
        })
    }

    pub fn end(&mut self, reason: EndReason) -> Vec<SessionEvent> {
        if let Some(open) = self.open.take() {
            self.push(EventKind::StageExited { stage: open });
        }
        self.push(EventKind::SessionEnded { reason });
        self.events.clone()
    }

    /// Stops without closing the open stage, as a crashed client would.
    pub fn cut(&mut self) -> Vec<SessionEvent> {
        self.events.clone()
    }
}

/// Six attempts with known harness outcomes: the first three succeed, the
/// last three do not. `timeline` is (buggy, fixed) for number-timeline and
/// `ticket` the same for ticket-price.
pub fn judged_sessions(timeline: (&str, &str), ticket: (&str, &str)) -> Vec<(Vec<SessionEvent>, bool)> {
    let (nt_bug, nt_fix) = timeline;
    let (tp_bug, tp_fix) = ticket;
    let t0 = 1_730_710_800_000;
    let mut out = Vec::new();

    // Fixed, tested, reported a pass.
    let mut b = LogBuilder::new("judge-1", "p1", "number-timeline", t0);
    b.stage(Stage::Predict).wait(9_000).respond("prints 25 to 30");
    b.stage(Stage::Run).wait(4_000).run(nt_bug, &["25", "30"]);
    b.stage(Stage::SpotTheDefect).wait(6_000).respond("30 is missing");
    b.stage(Stage::InspectTheCode).wait(20_000);
    b.stage(Stage::FindTheError).wait(7_000).select(6, true);
    b.stage(Stage::FixTheError).wait(15_000).edit(nt_fix).respond("range stops early");
    b.stage(Stage::Test).wait(5_000).run(nt_fix, &["25", "30"]).report(true, Some(true), NextChoice::Finish);
    out.push((b.end(EndReason::Finished), true));

    // Fixed in Test, then broke the program again while modifying.
    let mut b = LogBuilder::new("judge-2", "p2", "number-timeline", t0 + 1);
    b.stage(Stage::Predict).wait(3_000).respond("a list of numbers");
    b.stage(Stage::Run).wait(3_000).run(nt_bug, &["25", "30"]);
    b.stage(Stage::SpotTheDefect).wait(3_000).respond("last number missing");
    b.stage(Stage::InspectTheCode).wait(3_000).run(nt_bug, &["1", "3"]);
    b.stage(Stage::FindTheError).wait(3_000).select(6, true);
    b.stage(Stage::FixTheError).wait(3_000).edit(nt_fix).respond("add one to B");
    b.stage(Stage::Test).wait(3_000).run(nt_fix, &["25", "30"]).report(true, Some(true), NextChoice::Modify);
    b.stage(Stage::Modify).wait(3_000).edit("print('changed')\n").run("print('changed')\n", &[]);
    out.push((b.end(EndReason::Finished), true));

    // Ticket price fixed after one failed fix.
    let mut b = LogBuilder::new("judge-3", "p3", "ticket-price", t0 + 2);
    b.stage(Stage::Predict).wait(5_000).respond("prices by age");
    b.stage(Stage::Run).wait(5_000).run(tp_bug, &["65"]);
    b.stage(Stage::SpotTheDefect).wait(5_000).respond("65 pays full price");
    b.stage(Stage::InspectTheCode).wait(5_000);
    b.stage(Stage::FindTheError).wait(5_000).select(2, false).hint(0).select(4, true);
    b.stage(Stage::FixTheError).wait(5_000).edit(tp_bug).respond("try again");
    b.stage(Stage::Test).wait(5_000).run(tp_bug, &["65"]).report(false, Some(false), NextChoice::RetryFix);
    b.stage(Stage::FixTheError).wait(5_000).edit(tp_fix).respond("use >=");
    b.stage(Stage::Test).wait(5_000).run(tp_fix, &["65"]).report(true, Some(true), NextChoice::Finish);
    out.push((b.end(EndReason::Finished), true));

    // Claimed success with the buggy program; the recorded verdict lies.
    let mut b = LogBuilder::new("judge-4", "p1", "number-timeline", t0 + 3);
    b.stage(Stage::Predict).wait(2_000).respond("numbers");
    b.stage(Stage::Run).wait(2_000).run(nt_bug, &["2", "4"]);
    b.stage(Stage::SpotTheDefect).wait(2_000).respond("looks fine");
    b.stage(Stage::InspectTheCode).wait(2_000);
    b.stage(Stage::FindTheError).wait(2_000).select(3, false).hint(0).select(6, true);
    b.stage(Stage::FixTheError).wait(2_000).respond("nothing to change");
    b.stage(Stage::Test).wait(2_000).run(nt_bug, &["30", "25"]).report(true, Some(true), NextChoice::Finish);
    out.push((b.end(EndReason::Finished), false));

    // Abandoned before running anything.
    let mut b = LogBuilder::new("judge-5", "p2", "ticket-price", t0 + 4);
    b.stage(Stage::Predict).wait(40_000).respond("not sure");
    out.push((b.end(EndReason::Abandoned), false));

    // Had a passing program in Inspect, then broke it; only the last run counts.
    let mut b = LogBuilder::new("judge-6", "p3", "number-timeline", t0 + 5);
    b.stage(Stage::Predict).wait(1_000).respond("counts up");
    b.stage(Stage::Run).wait(1_000).run(nt_bug, &["25", "30"]);
    b.stage(Stage::SpotTheDefect).wait(1_000).respond("stops at 29");
    b.stage(Stage::InspectTheCode).wait(1_000).run(nt_fix, &["25", "30"]);
    b.stage(Stage::FindTheError).wait(1_000).select(6, true);
    b.stage(Stage::FixTheError).wait(1_000).edit("print(1\n").respond("rewrote it");
    b.stage(Stage::Test).wait(1_000).run("print(1\n", &[]);
    out.push((b.cut(), false));

    out
}
