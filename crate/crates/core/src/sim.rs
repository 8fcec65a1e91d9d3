//! Seeded synthetic cohorts.
//!
//! Each simulated student has a latent engagement and skill level that
//! drive dwell times, how often they run code, localisation accuracy and fix
//! quality. Sessions are produced by driving the real stage machine and the
//! real runner, so the logs are indistinguishable from service logs. Survey
//! answers are loosely tied to engagement.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use thiserror::Error;

use crate::analytics::survey::{SurveyScale, SurveyTable};
use crate::challenge::{Challenge, Corpus};
use crate::error::{RunnerError, TransitionError};
use crate::runner::{RunRequest, RunResult, Runner};
use crate::session_log::{EndReason, EventKind, EventStore, SessionEvent};
use crate::stage::{advance, ExtensionChoice, NextChoice, SessionState, Stage, TransitionEvent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("simulated student made an illegal move: {0}")]
    Transition(#[from] TransitionError),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("reading solutions: {0}")]
    Io(#[from] std::io::Error),
}

/// Reference fixes, keyed by challenge id.
pub type Solutions = BTreeMap<String, String>;

/// Reads `<id>.py` files from a directory.
pub fn load_solutions(dir: &Path) -> Result<Solutions, SimError> {
    let mut out = Solutions::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if let (Some(stem), true) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().is_some_and(|e| e == "py"),
        ) {
            out.insert(stem.to_string(), std::fs::read_to_string(&path)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortConfig {
    pub seed: u64,
    pub participants: usize,
    pub min_sessions: usize,
    pub max_sessions: usize,
    pub start_ms: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            seed: 2025,
            participants: 45,
            min_sessions: 5,
            max_sessions: 9,
            // 2024-11-04T09:00:00Z
            start_ms: 1_730_710_800_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    /// Sorted by session id.
    pub sessions: Vec<Vec<SessionEvent>>,
    pub survey: SurveyTable,
}

impl Cohort {
    pub fn write_to(&self, store: &mut impl EventStore) -> Result<(), crate::error::LogError> {
        for events in &self.sessions {
            for e in events {
                store.append(e.clone())?;
            }
        }
        Ok(())
    }
}

/// Typical dwell in seconds per stage for an average student.
fn median_dwell(stage: Stage) -> f64 {
    match stage {
        Stage::Predict => 50.0,
        Stage::Run => 20.0,
        Stage::SpotTheDefect => 28.0,
        Stage::InspectTheCode => 19.0,
        Stage::FindTheError => 15.0,
        Stage::FixTheError => 30.0,
        Stage::Test => 12.0,
        Stage::Modify => 60.0,
        Stage::Make => 90.0,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Student {
    id: String,
    engagement: f64,
    skill: f64,
}

struct RunCache<'r> {
    runner: &'r Runner,
    runs: HashMap<(String, Vec<String>), RunResult>,
    harness: HashMap<(String, String), bool>,
}

impl RunCache<'_> {
    fn run(&mut self, program: &str, stdin: &[String]) -> Result<RunResult, RunnerError> {
        let key = (program.to_string(), stdin.to_vec());
        if let Some(r) = self.runs.get(&key) {
            return Ok(r.clone());
        }
        let r = self.runner.run(&RunRequest::new(program, stdin.to_vec()))?;
        self.runs.insert(key, r.clone());
        Ok(r)
    }

    fn harness(&mut self, challenge: &Challenge, program: &str) -> Result<Option<bool>, RunnerError> {
        if challenge.test_cases.is_empty() {
            return Ok(None);
        }
        let key = (challenge.id.clone(), program.to_string());
        if let Some(&v) = self.harness.get(&key) {
            return Ok(Some(v));
        }
        let v = self.runner.evaluate_harness(program, &challenge.test_cases)?.all_passed;
        self.harness.insert(key, v);
        Ok(Some(v))
    }
}

struct Session<'a> {
    challenge: &'a Challenge,
    state: SessionState,
    events: Vec<SessionEvent>,
    session_id: String,
    participant_id: String,
    now: u64,
}

impl Session<'_> {
    fn stamp(&mut self, kinds: Vec<EventKind>, at: u64) {
        self.now = self.now.max(at);
        for kind in kinds {
            self.events.push(SessionEvent {
                session_id: self.session_id.clone(),
                participant_id: Some(self.participant_id.clone()),
                challenge_id: self.challenge.id.clone(),
                ts_ms: self.now,
                kind,
            });
        }
    }

    fn apply(&mut self, cmd: TransitionEvent, at: u64) -> Result<(), TransitionError> {
        let t = advance(&self.state, &cmd, self.challenge)?;
        self.state = t.state;
        self.stamp(t.events, at);
        Ok(())
    }

    fn abandon(&mut self, at: u64) {
        self.stamp(
            vec![EventKind::SessionEnded {
                reason: EndReason::Abandoned,
            }],
            at,
        );
    }
}

fn inputs_for(challenge: &Challenge, i: usize) -> Vec<String> {
    if challenge.test_cases.is_empty() {
        Vec::new()
    } else {
        challenge.test_cases[i % challenge.test_cases.len()].inputs.clone()
    }
}

const PREDICTIONS: [&str; 4] = [
    "I think it prints the numbers",
    "it will show a message",
    "the output will be the answer",
    "It prints 25 26 27 28 29 30",
];
const SPOTS: [&str; 3] = [
    "the last number is missing",
    "the actual output is different from the expected",
    "it printed the wrong thing",
];
const HYPOTHESES: [&str; 3] = [
    "maybe the loop stops too early",
    "I think the condition is wrong",
    "something is wrong with the variables",
];

struct Simulator<'a, 'r> {
    rng: ChaCha8Rng,
    cache: RunCache<'r>,
    solutions: &'a Solutions,
}

impl<'a> Simulator<'a, '_> {
    fn dwell_ms(&mut self, stage: Stage, student: &Student) -> u64 {
        let median = median_dwell(stage) * (0.45 * student.engagement).exp();
        let d = LogNormal::new(median.ln(), 0.85).expect("valid lognormal");
        (d.sample(&mut self.rng) * 1000.0).clamp(1000.0, 1_800_000.0).round() as u64
    }

    fn pick<'s>(&mut self, pool: &[&'s str]) -> &'s str {
        pool[self.rng.random_range(0..pool.len())]
    }

    fn run(&mut self, s: &mut Session<'_>, stdin: Vec<String>, at: u64) -> Result<(), SimError> {
        let program = s.state.working_program.clone();
        let result = self.cache.run(&program, &stdin)?;
        let harness_passed = if s.state.stage == Stage::Test {
            self.cache.harness(s.challenge, &program)?
        } else {
            None
        };
        let snapshot = result.snapshot(&RunRequest::new(program, stdin));
        s.apply(
            TransitionEvent::RunCompleted {
                snapshot,
                harness_passed,
            },
            at,
        )?;
        Ok(())
    }

    /// `k` runs spread over the stage, which spans `start..end`.
    fn runs_within(&mut self, s: &mut Session<'_>, k: usize, start: u64, end: u64) -> Result<(), SimError> {
        for r in 0..k {
            let at = start + (end - start) * (r as u64 + 1) / (k as u64 + 2);
            let stdin = inputs_for(s.challenge, self.rng.random_range(0..4));
            self.run(s, stdin, at)?;
        }
        Ok(())
    }

    fn wrong_fix(&mut self, challenge: &Challenge) -> String {
        let comment = ["# fixed it", "# changed the loop", "# tried a new value"];
        let c = self.pick(&comment);
        format!("{c}\n{}", challenge.program)
    }

    fn session(&mut self, student: &Student, challenge: &'a Challenge, session_id: String, start: u64) -> Result<Vec<SessionEvent>, SimError> {
        let opening = SessionState::start(challenge);
        let mut s = Session {
            challenge,
            state: opening.state,
            events: Vec::new(),
            session_id,
            participant_id: student.id.clone(),
            now: start,
        };
        s.stamp(opening.events, start);

        let z = student.engagement;
        let mut steps = 0;
        while !s.state.is_finished() {
            steps += 1;
            let stage = s.state.stage;
            let entered = s.now;
            let end = entered + self.dwell_ms(stage, student);
            if steps > 60 || self.rng.random_bool(0.012) {
                s.abandon(end);
                break;
            }
            match stage {
                Stage::Predict => {
                    let text = self.pick(&PREDICTIONS).to_string();
                    s.apply(TransitionEvent::SubmitResponse { text }, end)?;
                }
                Stage::Run => {
                    let stdin = inputs_for(challenge, s.state.test_case_cursor);
                    self.run(&mut s, stdin, end)?;
                }
                Stage::SpotTheDefect => {
                    let text = self.pick(&SPOTS).to_string();
                    if challenge.syntax_error_flag && self.rng.random_bool(0.5) {
                        s.apply(TransitionEvent::SkipInspect { text }, end)?;
                    } else {
                        s.apply(TransitionEvent::SubmitResponse { text }, end)?;
                    }
                }
                Stage::InspectTheCode => {
                    let runs = if self.rng.random_bool(sigmoid(-1.3 + 0.9 * z)) {
                        1 + usize::from(self.rng.random_bool(0.3))
                    } else {
                        0
                    };
                    self.runs_within(&mut s, runs, entered, end)?;
                    let text = if self.rng.random_bool(sigmoid(0.2 + 0.9 * z)) {
                        self.pick(&HYPOTHESES).to_string()
                    } else {
                        String::new()
                    };
                    s.apply(TransitionEvent::SubmitResponse { text }, end)?;
                }
                Stage::FindTheError => match challenge.error_line() {
                    Some(line) => {
                        let first = s.state.iteration(Stage::FindTheError) == 1 && s.state.find_attempts == 0;
                        let p = if first { 1.6 + 0.8 * student.skill } else { 0.2 + 0.6 * student.skill };
                        let chosen = if self.rng.random_bool(sigmoid(p)) || s.state.find_attempts >= 6 {
                            line
                        } else {
                            let n = challenge.line_count() as u32;
                            let other = self.rng.random_range(1..n);
                            if other >= line { other + 1 } else { other }
                        };
                        s.apply(TransitionEvent::SelectLine { line: chosen }, end)?;
                        if s.state.stage == Stage::FindTheError && self.rng.random_bool(0.4) {
                            s.apply(TransitionEvent::ReturnToInspect, end)?;
                        }
                    }
                    None => {
                        let text = format!("lines {:?}", challenge.error_spec.line_numbers);
                        s.apply(TransitionEvent::SubmitResponse { text }, end)?;
                    }
                },
                Stage::FixTheError => {
                    let good = self.rng.random_bool(sigmoid(-0.4 + 0.9 * student.skill + 0.3 * z));
                    let program = match (good, self.solutions.get(&challenge.id)) {
                        (true, Some(fix)) => fix.clone(),
                        _ => self.wrong_fix(challenge),
                    };
                    s.apply(
                        TransitionEvent::SubmitFix {
                            program,
                            text: "I changed the line with the error".into(),
                        },
                        end,
                    )?;
                }
                Stage::Test => {
                    let u: f64 = self.rng.random();
                    let zero = sigmoid(-1.0 - 0.6 * z);
                    let runs = if u < zero {
                        0
                    } else if u < zero + 0.55 {
                        1
                    } else {
                        2
                    };
                    self.runs_within(&mut s, runs, entered, end)?;
                    let fixed = self
                        .cache
                        .harness(challenge, &s.state.working_program)?
                        .unwrap_or_else(|| self.solutions.get(&challenge.id) == Some(&s.state.working_program));
                    let success = self.rng.random_bool(if fixed { 0.93 } else { 0.2 });
                    if !success && s.state.fix_attempts >= 2 && self.rng.random_bool(0.5) {
                        s.abandon(end);
                        break;
                    }
                    let next = if success {
                        let u: f64 = self.rng.random();
                        if u < 0.25 {
                            NextChoice::Modify
                        } else if u < 0.35 {
                            NextChoice::Make
                        } else {
                            NextChoice::Finish
                        }
                    } else if self.rng.random_bool(0.6) {
                        NextChoice::Inspect
                    } else {
                        NextChoice::RetryFix
                    };
                    s.apply(TransitionEvent::ReportOutcome { success, next }, end)?;
                }
                Stage::Modify => {
                    let edited = format!("{}\n# modified\n", s.state.working_program);
                    s.apply(
                        TransitionEvent::SubmitFix {
                            program: edited,
                            text: String::new(),
                        },
                        entered + (end - entered) / 2,
                    )?;
                    self.runs_within(&mut s, 1, entered + (end - entered) / 2, end)?;
                    if self.rng.random_bool(0.5) {
                        s.apply(TransitionEvent::SubmitResponse { text: "added a message".into() }, end)?;
                    } else {
                        s.apply(
                            TransitionEvent::ChooseExtension {
                                choice: ExtensionChoice::Finish,
                            },
                            end,
                        )?;
                    }
                }
                Stage::Make => {
                    self.runs_within(&mut s, 1, entered, end)?;
                    s.apply(
                        TransitionEvent::ChooseExtension {
                            choice: ExtensionChoice::Finish,
                        },
                        end,
                    )?;
                }
            }
        }
        Ok(s.events)
    }
}

fn likert(rng: &mut ChaCha8Rng, centre: f64, z: f64, weight: f64, scale: &SurveyScale) -> Option<u8> {
    if rng.random_bool(0.02) {
        return None;
    }
    let noise: f64 = rng.sample(StandardNormal);
    let v = (centre + weight * z + 0.8 * noise).round();
    Some(v.clamp(f64::from(scale.min), f64::from(scale.max)) as u8)
}

pub fn simulate_cohort(corpus: &Corpus, solutions: &Solutions, runner: &Runner, cfg: &CohortConfig) -> Result<Cohort, SimError> {
    let challenges: Vec<&Challenge> = corpus.iter().collect();
    if challenges.is_empty() {
        return Err(SimError::EmptyCorpus);
    }
    let mut sim = Simulator {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cache: RunCache {
            runner,
            runs: HashMap::new(),
            harness: HashMap::new(),
        },
        solutions,
    };

    let scale = SurveyScale::default();
    let mut items = vec![scale.sifft_item.clone()];
    items.extend(scale.restrictive_items.iter().cloned());
    items.push("easy_to_use".into());
    let mut responses = BTreeMap::new();
    let mut sessions = Vec::new();

    for p in 0..cfg.participants {
        let student = Student {
            id: format!("p{:02}", p + 1),
            engagement: sim.rng.sample(StandardNormal),
            skill: sim.rng.sample(StandardNormal),
        };
        let mut row = vec![likert(&mut sim.rng, 3.0, student.engagement, 0.9, &scale)];
        for _ in &scale.restrictive_items {
            row.push(likert(&mut sim.rng, 2.3, student.engagement, 0.7, &scale));
        }
        row.push(likert(&mut sim.rng, 3.6, 0.0, 0.0, &scale));
        responses.insert(student.id.clone(), row);

        let count = sim.rng.random_range(cfg.min_sessions..=cfg.max_sessions);
        let mut now = cfg.start_ms + p as u64 * 3_600_000;
        for k in 0..count {
            let challenge = challenges[sim.rng.random_range(0..challenges.len())];
            let id = format!("{}-s{:02}", student.id, k + 1);
            let events = sim.session(&student, challenge, id, now)?;
            now = events.last().map_or(now, |e| e.ts_ms) + sim.rng.random_range(20_000..120_000);
            sessions.push(events);
        }
    }
    sessions.sort_by(|a, b| a[0].session_id.cmp(&b[0].session_id));
    Ok(Cohort {
        sessions,
        survey: SurveyTable {
            items,
            responses,
            scale,
        },
    })
}
