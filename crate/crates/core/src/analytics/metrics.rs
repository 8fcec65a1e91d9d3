use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;

use super::stats::{describe, Descriptive};
use crate::challenge::Corpus;
use crate::error::{AnalyticsError, RunnerError};
use crate::runner::Runner;
use crate::session_log::SessionSummary;
use crate::stage::Stage;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimes {
    pub stage: Stage,
    #[serde(flatten)]
    pub stats: Descriptive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeTimes {
    pub challenge_id: String,
    #[serde(flatten)]
    pub stats: Descriptive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimeStats {
    /// Only stages with at least one instance, in process order.
    pub per_stage: Vec<StageTimes>,
    /// Every stage instance pooled.
    pub all_stages: Descriptive,
    /// Total time per attempt, completed or not.
    pub per_attempt: Descriptive,
    pub per_challenge: Vec<ChallengeTimes>,
}

impl StageTimeStats {
    pub fn stage(&self, stage: Stage) -> Option<&Descriptive> {
        self.per_stage.iter().find(|s| s.stage == stage).map(|s| &s.stats)
    }
}

pub fn stage_time_stats(summaries: &[SessionSummary]) -> Result<StageTimeStats, AnalyticsError> {
    if summaries.is_empty() {
        return Err(AnalyticsError::NoData);
    }
    let mut by_stage: BTreeMap<Stage, Vec<f64>> = BTreeMap::new();
    let mut pooled = Vec::new();
    let mut by_challenge: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in summaries {
        for inst in &s.stage_instances {
            by_stage.entry(inst.stage).or_default().push(inst.seconds);
            pooled.push(inst.seconds);
        }
        by_challenge.entry(&s.challenge_id).or_default().push(s.total_seconds);
    }
    let totals: Vec<f64> = summaries.iter().map(|s| s.total_seconds).collect();
    Ok(StageTimeStats {
        per_stage: by_stage
            .into_iter()
            .filter_map(|(stage, xs)| describe(&xs).map(|stats| StageTimes { stage, stats }))
            .collect(),
        all_stages: describe(&pooled).ok_or(AnalyticsError::NoData)?,
        per_attempt: describe(&totals).expect("non-empty"),
        per_challenge: by_challenge
            .into_iter()
            .filter_map(|(id, xs)| {
                describe(&xs).map(|stats| ChallengeTimes {
                    challenge_id: id.to_string(),
                    stats,
                })
            })
            .collect(),
    })
}

/// Harness verdict for one attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionVerdict {
    pub session_id: String,
    pub participant_id: Option<String>,
    pub challenge_id: String,
    /// `None` when the challenge has no test cases to judge against.
    pub success: Option<bool>,
}

/// Judges every attempt by re-running its final debugging snapshot against
/// the challenge's test cases. Recorded verdicts are not trusted. Identical
/// (challenge, program) pairs are evaluated once.
pub fn judge_sessions(
    summaries: &[SessionSummary],
    corpus: &Corpus,
    runner: &Runner,
) -> Result<Vec<SessionVerdict>, AnalyticsError> {
    let mut pending: BTreeSet<(&str, &str)> = BTreeSet::new();
    for s in summaries {
        let challenge = corpus
            .get(&s.challenge_id)
            .ok_or_else(|| AnalyticsError::MissingChallenge(s.challenge_id.clone()))?;
        if let (false, Some(snap)) = (challenge.test_cases.is_empty(), &s.final_snapshot) {
            pending.insert((challenge.id.as_str(), snap.program.as_str()));
        }
    }

    let jobs: Vec<(&str, &str)> = pending.into_iter().collect();
    let results: Mutex<BTreeMap<(&str, &str), bool>> = Mutex::new(BTreeMap::new());
    let workers = thread::available_parallelism().map_or(4, |n| n.get()).min(8);
    let next = Mutex::new(0usize);
    thread::scope(|scope| -> Result<(), RunnerError> {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| -> Result<(), RunnerError> {
                    loop {
                        let job = {
                            let mut n = next.lock().unwrap();
                            let Some(&job) = jobs.get(*n) else { return Ok(()) };
                            *n += 1;
                            job
                        };
                        let cases = &corpus.get(job.0).expect("checked above").test_cases;
                        let verdict = runner.evaluate_harness(job.1, cases)?.all_passed;
                        results.lock().unwrap().insert(job, verdict);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().expect("harness worker panicked")?;
        }
        Ok(())
    })?;
    let results = results.into_inner().unwrap();

    Ok(summaries
        .iter()
        .map(|s| {
            let challenge = corpus.get(&s.challenge_id).expect("checked above");
            let success = if challenge.test_cases.is_empty() {
                None
            } else {
                Some(s.final_snapshot.as_ref().is_some_and(|snap| {
                    results[&(challenge.id.as_str(), snap.program.as_str())]
                }))
            };
            SessionVerdict {
                session_id: s.session_id.clone(),
                participant_id: s.participant_id.clone(),
                challenge_id: s.challenge_id.clone(),
                success,
            }
        })
        .collect())
}

fn rate(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalisationStats {
    pub total: usize,
    pub correct: usize,
    pub rate: Option<f64>,
    /// Attempts with at least one line selection.
    pub first_attempt_total: usize,
    pub first_attempt_correct: usize,
    pub first_attempt_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngagementStats {
    pub inspect_instances: usize,
    pub inspect_zero_runs: usize,
    pub inspect_zero_run_fraction: Option<f64>,
    pub inspect_without_response: usize,
    pub inspect_without_response_fraction: Option<f64>,
    pub test_instances: usize,
    pub test_zero_runs: usize,
    pub test_zero_run_fraction: Option<f64>,
    pub test_one_run: usize,
    pub test_one_run_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeStats {
    pub attempts: usize,
    /// Attempts whose challenge has test cases.
    pub judged_attempts: usize,
    pub successes: usize,
    pub success_rate: Option<f64>,
    pub self_reported_successes: usize,
    pub localisation: LocalisationStats,
    pub engagement: EngagementStats,
}

/// Success, localisation and engagement counts. `verdicts` must line up with
/// `summaries` (as returned by [`judge_sessions`]).
pub fn outcome_stats(summaries: &[SessionSummary], verdicts: &[SessionVerdict]) -> OutcomeStats {
    debug_assert_eq!(summaries.len(), verdicts.len());
    let judged = verdicts.iter().filter(|v| v.success.is_some()).count();
    let successes = verdicts.iter().filter(|v| v.success == Some(true)).count();

    let selections = summaries.iter().flat_map(|s| &s.line_selections);
    let total = selections.clone().count();
    let correct = selections.filter(|l| l.correct).count();
    let firsts: Vec<bool> = summaries.iter().filter_map(|s| s.first_selection_correct()).collect();
    let first_correct = firsts.iter().filter(|&&c| c).count();

    let inspect: Vec<_> = summaries.iter().flat_map(|s| s.instances_of(Stage::InspectTheCode)).collect();
    let test: Vec<_> = summaries.iter().flat_map(|s| s.instances_of(Stage::Test)).collect();
    let inspect_zero = inspect.iter().filter(|i| i.runs == 0).count();
    let inspect_silent = inspect.iter().filter(|i| i.responses.is_empty()).count();
    let test_zero = test.iter().filter(|i| i.runs == 0).count();
    let test_one = test.iter().filter(|i| i.runs == 1).count();

    OutcomeStats {
        attempts: summaries.len(),
        judged_attempts: judged,
        successes,
        success_rate: rate(successes, judged),
        self_reported_successes: summaries.iter().filter(|s| s.completed).count(),
        localisation: LocalisationStats {
            total,
            correct,
            rate: rate(correct, total),
            first_attempt_total: firsts.len(),
            first_attempt_correct: first_correct,
            first_attempt_rate: rate(first_correct, firsts.len()),
        },
        engagement: EngagementStats {
            inspect_instances: inspect.len(),
            inspect_zero_runs: inspect_zero,
            inspect_zero_run_fraction: rate(inspect_zero, inspect.len()),
            inspect_without_response: inspect_silent,
            inspect_without_response_fraction: rate(inspect_silent, inspect.len()),
            test_instances: test.len(),
            test_zero_runs: test_zero,
            test_zero_run_fraction: rate(test_zero, test.len()),
            test_one_run: test_one,
            test_one_run_fraction: rate(test_one, test.len()),
        },
    }
}
