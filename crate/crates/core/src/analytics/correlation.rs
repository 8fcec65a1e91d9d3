//! Per-participant survey and usage variables and their pairwise tau-b
//! matrix.

use std::collections::BTreeMap;

use serde::Serialize;

use super::metrics::SessionVerdict;
use super::stats::kendall_tau_b;
use super::survey::SurveyTable;
use crate::error::AnalyticsError;
use crate::session_log::SessionSummary;

pub const VARIABLES: [&str; 6] = [
    "sifft_utility",
    "restrictive_features_utility",
    "mean_time_per_challenge",
    "mean_time_per_stage",
    "challenges_completed",
    "challenges_attempted",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantVariables {
    pub participant_id: String,
    /// In [`VARIABLES`] order.
    pub values: [Option<f64>; 6],
}

/// Joins survey rows with each participant's attempts. Participants missing
/// from either side are left out.
pub fn participant_variables(
    survey: &SurveyTable,
    summaries: &[SessionSummary],
    verdicts: &[SessionVerdict],
) -> Result<Vec<ParticipantVariables>, AnalyticsError> {
    struct Usage {
        totals: Vec<f64>,
        stage_seconds: Vec<f64>,
        completed: usize,
    }
    let mut usage: BTreeMap<&str, Usage> = BTreeMap::new();
    for (s, v) in summaries.iter().zip(verdicts) {
        let Some(pid) = s.participant_id.as_deref() else { continue };
        let u = usage.entry(pid).or_insert(Usage {
            totals: Vec::new(),
            stage_seconds: Vec::new(),
            completed: 0,
        });
        u.totals.push(s.total_seconds);
        u.stage_seconds.extend(s.stage_instances.iter().map(|i| i.seconds));
        if v.success == Some(true) {
            u.completed += 1;
        }
    }

    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let rows: Vec<ParticipantVariables> = survey
        .participants()
        .filter_map(|pid| {
            let u = usage.get(pid)?;
            Some(ParticipantVariables {
                participant_id: pid.to_string(),
                values: [
                    survey.sifft_utility(pid),
                    survey.restrictive_utility(pid),
                    mean(&u.totals),
                    mean(&u.stage_seconds),
                    Some(u.completed as f64),
                    Some(u.totals.len() as f64),
                ],
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(AnalyticsError::JoinError);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// `null` where tau-b is undefined (constant variable, under two pairs).
    pub tau: Vec<Vec<Option<f64>>>,
    pub p_value: Vec<Vec<Option<f64>>>,
    pub n: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<(Option<f64>, Option<f64>, usize)> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some((self.tau[i][j], self.p_value[i][j], self.n[i][j]))
    }
}

pub fn correlation_matrix(rows: &[ParticipantVariables]) -> CorrelationMatrix {
    let k = VARIABLES.len();
    let column = |j: usize| -> Vec<f64> { rows.iter().map(|r| r.values[j].unwrap_or(f64::NAN)).collect() };
    let columns: Vec<Vec<f64>> = (0..k).map(column).collect();
    let mut tau = vec![vec![None; k]; k];
    let mut p_value = vec![vec![None; k]; k];
    let mut n = vec![vec![0; k]; k];
    for i in 0..k {
        for j in i..k {
            let complete = columns[i]
                .iter()
                .zip(&columns[j])
                .filter(|(a, b)| !a.is_nan() && !b.is_nan())
                .count();
            let (t, p) = match kendall_tau_b(&columns[i], &columns[j]) {
                Ok(r) => (Some(r.tau), r.p_value),
                Err(_) => (None, None),
            };
            for (a, b) in [(i, j), (j, i)] {
                tau[a][b] = t;
                p_value[a][b] = p;
                n[a][b] = complete;
            }
        }
    }
    CorrelationMatrix {
        variables: VARIABLES.iter().map(|v| v.to_string()).collect(),
        tau,
        p_value,
        n,
    }
}
