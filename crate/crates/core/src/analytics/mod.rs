//! Batch metrics over session logs: stage dwell times, success and
//! localisation rates, engagement counts and survey correlations.

pub mod correlation;
pub mod metrics;
pub mod stats;
pub mod survey;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

pub use correlation::{correlation_matrix, participant_variables, CorrelationMatrix, ParticipantVariables, VARIABLES};
pub use metrics::{
    judge_sessions, outcome_stats, stage_time_stats, EngagementStats, LocalisationStats, OutcomeStats,
    SessionVerdict, StageTimeStats,
};
pub use stats::{cronbach_alpha, describe, kendall_tau_b, skewness, Descriptive, TauB};
pub use survey::{parse_survey, read_survey_csv, SurveyScale, SurveyTable};

use crate::challenge::Corpus;
use crate::error::AnalyticsError;
use crate::runner::Runner;
use crate::session_log::{read_log_dir, summarize, SessionEvent, SessionSummary};

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Sorted by session id.
    pub summaries: Vec<SessionSummary>,
    pub verdicts: Vec<SessionVerdict>,
    pub stage_times: StageTimeStats,
    pub outcomes: OutcomeStats,
    pub participants: Option<Vec<ParticipantVariables>>,
    pub correlations: Option<CorrelationMatrix>,
}

pub fn analyze_sessions(
    sessions: &[Vec<SessionEvent>],
    corpus: &Corpus,
    runner: &Runner,
    survey: Option<&SurveyTable>,
) -> Result<Analysis, AnalyticsError> {
    let mut summaries = sessions
        .iter()
        .map(|events| summarize(events))
        .collect::<Result<Vec<_>, _>>()?;
    summaries.sort_by(|a, b| a.session_id.cmp(&b.session_id));

    let stage_times = stage_time_stats(&summaries)?;
    let verdicts = judge_sessions(&summaries, corpus, runner)?;
    let outcomes = outcome_stats(&summaries, &verdicts);
    let (participants, correlations) = match survey {
        Some(survey) => {
            let rows = participant_variables(survey, &summaries, &verdicts)?;
            let matrix = correlation_matrix(&rows);
            (Some(rows), Some(matrix))
        }
        None => (None, None),
    };
    Ok(Analysis {
        summaries,
        verdicts,
        stage_times,
        outcomes,
        participants,
        correlations,
    })
}

pub fn analyze_dir(
    data_dir: &Path,
    corpus: &Corpus,
    runner: &Runner,
    survey: Option<&SurveyTable>,
) -> Result<Analysis, AnalyticsError> {
    let sessions = read_log_dir(data_dir)?;
    analyze_sessions(&sessions, corpus, runner, survey)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format {other:?} (expected json or csv)")),
        }
    }
}

#[derive(Serialize)]
struct CorrelationsDoc<'a> {
    #[serde(flatten)]
    matrix: &'a CorrelationMatrix,
    participants: &'a [ParticipantVariables],
}

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(|e| AnalyticsError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| AnalyticsError::Output(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 cells"))
}

fn descriptive_row(scope: &str, key: &str, d: &Descriptive) -> Vec<String> {
    vec![
        scope.to_string(),
        key.to_string(),
        d.count.to_string(),
        d.mean.to_string(),
        d.median.to_string(),
        num(d.sd),
        num(d.skewness),
    ]
}

pub fn stage_times_csv(st: &StageTimeStats) -> Result<String, AnalyticsError> {
    let mut rows = vec![["scope", "key", "count", "mean", "median", "sd", "skewness"]
        .map(String::from)
        .to_vec()];
    for s in &st.per_stage {
        rows.push(descriptive_row("stage", s.stage.as_str(), &s.stats));
    }
    rows.push(descriptive_row("all_stages", "", &st.all_stages));
    rows.push(descriptive_row("attempt", "", &st.per_attempt));
    for c in &st.per_challenge {
        rows.push(descriptive_row("challenge", &c.challenge_id, &c.stats));
    }
    csv_string(rows)
}

pub fn outcomes_csv(o: &OutcomeStats) -> Result<String, AnalyticsError> {
    let l = &o.localisation;
    let e = &o.engagement;
    let count = |v: usize| Some(v as f64);
    let pairs: Vec<(&str, Option<f64>)> = vec![
        ("attempts", count(o.attempts)),
        ("judged_attempts", count(o.judged_attempts)),
        ("successes", count(o.successes)),
        ("success_rate", o.success_rate),
        ("self_reported_successes", count(o.self_reported_successes)),
        ("localisation_total", count(l.total)),
        ("localisation_correct", count(l.correct)),
        ("localisation_rate", l.rate),
        ("localisation_first_attempt_total", count(l.first_attempt_total)),
        ("localisation_first_attempt_correct", count(l.first_attempt_correct)),
        ("localisation_first_attempt_rate", l.first_attempt_rate),
        ("inspect_instances", count(e.inspect_instances)),
        ("inspect_zero_runs", count(e.inspect_zero_runs)),
        ("inspect_zero_run_fraction", e.inspect_zero_run_fraction),
        ("inspect_without_response", count(e.inspect_without_response)),
        ("inspect_without_response_fraction", e.inspect_without_response_fraction),
        ("test_instances", count(e.test_instances)),
        ("test_zero_runs", count(e.test_zero_runs)),
        ("test_zero_run_fraction", e.test_zero_run_fraction),
        ("test_one_run", count(e.test_one_run)),
        ("test_one_run_fraction", e.test_one_run_fraction),
    ];
    let mut rows = vec![vec!["metric".to_string(), "value".to_string()]];
    rows.extend(pairs.into_iter().map(|(k, v)| vec![k.to_string(), num(v)]));
    csv_string(rows)
}

/// Square layout: one row per variable, then tau, p and n columns for every
/// variable.
pub fn correlations_csv(m: &CorrelationMatrix) -> Result<String, AnalyticsError> {
    let mut header = vec!["variable".to_string()];
    for prefix in ["tau", "p", "n"] {
        header.extend(m.variables.iter().map(|v| format!("{prefix}:{v}")));
    }
    let mut rows = vec![header];
    for (i, v) in m.variables.iter().enumerate() {
        let mut row = vec![v.clone()];
        row.extend(m.tau[i].iter().map(|t| num(*t)));
        row.extend(m.p_value[i].iter().map(|p| num(*p)));
        row.extend(m.n[i].iter().map(ToString::to_string));
        rows.push(row);
    }
    csv_string(rows)
}

fn json<T: Serialize>(v: &T) -> Result<String, AnalyticsError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| AnalyticsError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `stage_times`, `outcomes` and (with a survey) `correlations` in the
/// chosen format. Returns the paths written.
pub fn write_outputs(analysis: &Analysis, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, AnalyticsError> {
    fs::create_dir_all(out_dir)?;
    let ext = match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
    };
    let mut docs = vec![
        (
            "stage_times",
            match format {
                OutputFormat::Json => json(&analysis.stage_times)?,
                OutputFormat::Csv => stage_times_csv(&analysis.stage_times)?,
            },
        ),
        (
            "outcomes",
            match format {
                OutputFormat::Json => json(&analysis.outcomes)?,
                OutputFormat::Csv => outcomes_csv(&analysis.outcomes)?,
            },
        ),
    ];
    if let (Some(matrix), Some(participants)) = (&analysis.correlations, &analysis.participants) {
        docs.push((
            "correlations",
            match format {
                OutputFormat::Json => json(&CorrelationsDoc {
                    matrix,
                    participants,
                })?,
                OutputFormat::Csv => correlations_csv(matrix)?,
            },
        ));
    }
    let mut written = Vec::new();
    for (name, body) in docs {
        let path = out_dir.join(format!("{name}.{ext}"));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
