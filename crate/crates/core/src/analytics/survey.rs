//! Likert survey responses, one row per participant.
//!
//! The CSV has a header of item ids whose first column is `participant_id`.
//! Empty cells (or `NA`) are missing values.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AnalyticsError;

/// Which items feed the two composite variables, and the response range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyScale {
    /// "How helpful was the SIFFT process ...?"
    pub sifft_item: String,
    /// Averaged into the restrictive-features utility score.
    pub restrictive_items: Vec<String>,
    pub min: u8,
    pub max: u8,
}

impl Default for SurveyScale {
    fn default() -> Self {
        SurveyScale {
            sifft_item: "sifft_utility".into(),
            restrictive_items: vec![
                "forced_articulation".into(),
                "restricted_running".into(),
                "restricted_editing".into(),
                "forced_localisation".into(),
            ],
            min: 1,
            max: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyTable {
    pub items: Vec<String>,
    pub responses: BTreeMap<String, Vec<Option<u8>>>,
    pub scale: SurveyScale,
}

impl SurveyTable {
    fn item_index(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item)
    }

    pub fn response(&self, participant: &str, item: &str) -> Option<u8> {
        let idx = self.item_index(item)?;
        self.responses.get(participant)?.get(idx).copied().flatten()
    }

    pub fn sifft_utility(&self, participant: &str) -> Option<f64> {
        self.response(participant, &self.scale.sifft_item).map(f64::from)
    }

    /// Mean of the answered restrictive-feature items.
    pub fn restrictive_utility(&self, participant: &str) -> Option<f64> {
        let answered: Vec<f64> = self
            .scale
            .restrictive_items
            .iter()
            .filter_map(|item| self.response(participant, item))
            .map(f64::from)
            .collect();
        (!answered.is_empty()).then(|| answered.iter().sum::<f64>() / answered.len() as f64)
    }

    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.responses.keys().map(String::as_str)
    }

    /// Rows over `items`, NaN where missing. Input for reliability checks.
    pub fn item_matrix(&self, items: &[String]) -> Vec<Vec<f64>> {
        self.responses
            .keys()
            .map(|p| {
                items
                    .iter()
                    .map(|i| self.response(p, i).map_or(f64::NAN, f64::from))
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, AnalyticsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| AnalyticsError::Output(e.to_string());
        let mut header = vec!["participant_id".to_string()];
        header.extend(self.items.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (p, row) in &self.responses {
            let mut rec = vec![p.clone()];
            rec.extend(row.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| AnalyticsError::Output(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 strings"))
    }
}

pub fn parse_survey(reader: impl Read, scale: SurveyScale) -> Result<SurveyTable, AnalyticsError> {
    let err = |msg: String| AnalyticsError::Survey(msg);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.get(0) != Some("participant_id") {
        return Err(err("first column must be participant_id".into()));
    }
    let items: Vec<String> = header.iter().skip(1).map(String::from).collect();
    for needed in std::iter::once(&scale.sifft_item).chain(&scale.restrictive_items) {
        if !items.contains(needed) {
            return Err(err(format!("missing item column {needed:?}")));
        }
    }

    let mut responses = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let pid = rec.get(0).unwrap_or_default().to_string();
        if pid.is_empty() {
            return Err(err(format!("row {} has no participant_id", row + 2)));
        }
        let mut values = Vec::with_capacity(items.len());
        for (col, item) in items.iter().enumerate() {
            let cell = rec.get(col + 1).unwrap_or_default();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                values.push(None);
                continue;
            }
            let v: u8 = cell
                .parse()
                .map_err(|_| err(format!("{pid}/{item}: {cell:?} is not a whole number")))?;
            if !(scale.min..=scale.max).contains(&v) {
                return Err(err(format!(
                    "{pid}/{item}: {v} outside {}..={}",
                    scale.min, scale.max
                )));
            }
            values.push(Some(v));
        }
        if responses.insert(pid.clone(), values).is_some() {
            return Err(err(format!("participant {pid} appears twice")));
        }
    }
    Ok(SurveyTable {
        items,
        responses,
        scale,
    })
}

pub fn read_survey_csv(path: &Path, scale: SurveyScale) -> Result<SurveyTable, AnalyticsError> {
    parse_survey(std::fs::File::open(path)?, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "participant_id,sifft_utility,forced_articulation,restricted_running,restricted_editing,forced_localisation\n\
p1,4,2,3,,5\n\
p2,NA,1,1,1,1\n";

    #[test]
    fn parses_with_missing_values() {
        let t = parse_survey(CSV.as_bytes(), SurveyScale::default()).unwrap();
        assert_eq!(t.sifft_utility("p1"), Some(4.0));
        assert_eq!(t.sifft_utility("p2"), None);
        assert_eq!(t.restrictive_utility("p1"), Some(10.0 / 3.0));
        assert_eq!(t.restrictive_utility("p2"), Some(1.0));
        let back = parse_survey(t.to_csv().unwrap().as_bytes(), SurveyScale::default()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn out_of_range_rejected() {
        let bad = CSV.replace("p1,4", "p1,9");
        assert!(parse_survey(bad.as_bytes(), SurveyScale::default()).is_err());
    }

    #[test]
    fn missing_composite_item_rejected() {
        let bad = "participant_id,sifft_utility\np1,3\n";
        assert!(parse_survey(bad.as_bytes(), SurveyScale::default()).is_err());
    }
}
