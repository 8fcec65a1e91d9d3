//! Challenge documents: a buggy program, what it should do, the test cases
//! that expose the bug, and where the bug lives.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ChallengeError;

pub const MIN_DIFFICULTY: u8 = 1;
pub const MAX_DIFFICULTY: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Challenge {
    pub id: String,
    pub title: String,
    pub difficulty: u8,
    /// What the program is meant to do.
    pub description: String,
    pub program: String,
    pub language_tag: String,
    pub test_cases: Vec<TestCase>,
    pub error_spec: ErrorSpec,
    /// Escalating hints, revealed one at a time.
    pub hints: Vec<String>,
    pub modify_prompt: Option<String>,
    /// Set for simple syntax errors, where Inspect the Code may be skipped.
    pub syntax_error_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    /// Lines fed to stdin.
    pub inputs: Vec<String>,
    /// Output of the intended (fixed) program.
    pub expected_output: String,
    pub exposes_error: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSpec {
    pub single_line: bool,
    /// 1-based.
    pub line_numbers: Vec<u32>,
    pub nature: String,
}

impl Challenge {
    pub fn line_count(&self) -> usize {
        self.program.lines().count()
    }

    /// The erroneous line when the bug sits on exactly one line.
    pub fn error_line(&self) -> Option<u32> {
        match (self.error_spec.single_line, self.error_spec.line_numbers.as_slice()) {
            (true, [line]) => Some(*line),
            _ => None,
        }
    }

    /// Hint text for a (0-based) reveal index, clamped to the last hint.
    /// Challenges without hints fall back to a generic nudge.
    pub fn hint_at(&self, index: usize) -> &str {
        match self.hints.len() {
            0 => crate::prompts::FALLBACK_HINT,
            n => &self.hints[index.min(n - 1)],
        }
    }

    pub fn index_entry(&self) -> IndexEntry {
        IndexEntry {
            id: self.id.clone(),
            title: self.title.clone(),
            difficulty: self.difficulty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    EmptyId,
    EmptyProgram,
    DifficultyOutOfRange(u8),
    NoErrorLines,
    SingleLineArity(usize),
    LineOutOfRange { line: u32, line_count: usize },
    DuplicateLine(u32),
    NoExposingTestCase,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => write!(f, "id is empty"),
            Violation::EmptyProgram => write!(f, "program is empty"),
            Violation::DifficultyOutOfRange(d) => write!(
                f,
                "difficulty {d} outside {MIN_DIFFICULTY}..={MAX_DIFFICULTY}"
            ),
            Violation::NoErrorLines => write!(f, "error_spec.line_numbers is empty"),
            Violation::SingleLineArity(n) => {
                write!(f, "single_line error lists {n} line numbers, expected 1")
            }
            Violation::LineOutOfRange { line, line_count } => {
                write!(f, "error line {line} outside program of {line_count} lines")
            }
            Violation::DuplicateLine(line) => write!(f, "error line {line} listed twice"),
            Violation::NoExposingTestCase => {
                write!(f, "no test case is annotated as exposing the error")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Static checks only. Whether the test cases really expose the error is a
/// dynamic question answered by [`crate::runner::verify_exposure`].
pub fn validate_challenge(c: &Challenge) -> ValidationReport {
    let mut violations = Vec::new();
    if c.id.trim().is_empty() {
        violations.push(Violation::EmptyId);
    }
    if c.program.trim().is_empty() {
        violations.push(Violation::EmptyProgram);
    }
    if !(MIN_DIFFICULTY..=MAX_DIFFICULTY).contains(&c.difficulty) {
        violations.push(Violation::DifficultyOutOfRange(c.difficulty));
    }

    let lines = &c.error_spec.line_numbers;
    if lines.is_empty() {
        violations.push(Violation::NoErrorLines);
    } else if c.error_spec.single_line && lines.len() != 1 {
        violations.push(Violation::SingleLineArity(lines.len()));
    }
    let line_count = c.line_count();
    let mut seen = Vec::with_capacity(lines.len());
    for &line in lines {
        if line == 0 || line as usize > line_count {
            violations.push(Violation::LineOutOfRange { line, line_count });
        }
        if seen.contains(&line) {
            violations.push(Violation::DuplicateLine(line));
        }
        seen.push(line);
    }

    if !c.test_cases.is_empty() && !c.test_cases.iter().any(|t| t.exposes_error) {
        violations.push(Violation::NoExposingTestCase);
    }
    ValidationReport { violations }
}

pub fn parse_challenge(text: &str) -> Result<Challenge, ChallengeError> {
    let challenge: Challenge = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ChallengeError::Schema(e.to_string()),
        _ => ChallengeError::Parse(e.to_string()),
    })?;
    let report = validate_challenge(&challenge);
    if !report.is_empty() {
        return Err(ChallengeError::Invariant(report.violations));
    }
    Ok(challenge)
}

pub fn load_challenge(path: impl AsRef<Path>) -> Result<Challenge, ChallengeError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ChallengeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_challenge(&text)
}

pub fn save_challenge(path: impl AsRef<Path>, challenge: &Challenge) -> Result<(), ChallengeError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(challenge)
        .map_err(|e| ChallengeError::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| ChallengeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub title: String,
    pub difficulty: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadWarning {
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ChallengeIndex {
    pub entries: Vec<IndexEntry>,
    pub warnings: Vec<LoadWarning>,
}

/// Every valid challenge in a directory, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    challenges: BTreeMap<String, Challenge>,
    pub warnings: Vec<LoadWarning>,
}

impl Corpus {
    /// Loads `*.json` files directly under `dir`. Bad files become warnings;
    /// only an unreadable directory is an error.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ChallengeError> {
        let dir = dir.as_ref();
        let io_err = |source| ChallengeError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.is_file() && path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
        paths.sort();

        let mut corpus = Corpus::default();
        for path in paths {
            match load_challenge(&path) {
                Ok(c) if corpus.challenges.contains_key(&c.id) => {
                    corpus.warnings.push(LoadWarning {
                        message: format!("duplicate challenge id {:?}", c.id),
                        path,
                    })
                }
                Ok(c) => {
                    corpus.challenges.insert(c.id.clone(), c);
                }
                Err(e) => corpus.warnings.push(LoadWarning {
                    path,
                    message: e.to_string(),
                }),
            }
        }
        Ok(corpus)
    }

    pub fn from_challenges(challenges: impl IntoIterator<Item = Challenge>) -> Self {
        Corpus {
            challenges: challenges.into_iter().map(|c| (c.id.clone(), c)).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Challenge> {
        self.challenges.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Challenge> {
        self.challenges.values()
    }

    pub fn len(&self) -> usize {
        self.challenges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.challenges.is_empty()
    }

    /// Sorted by (difficulty, title).
    pub fn index(&self) -> ChallengeIndex {
        let mut entries: Vec<_> = self.iter().map(Challenge::index_entry).collect();
        entries.sort_by(|a, b| (a.difficulty, &a.title, &a.id).cmp(&(b.difficulty, &b.title, &b.id)));
        ChallengeIndex {
            entries,
            warnings: self.warnings.clone(),
        }
    }
}

pub fn list_challenges(dir: impl AsRef<Path>) -> Result<ChallengeIndex, ChallengeError> {
    Ok(Corpus::load(dir)?.index())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> Challenge {
        Challenge {
            id: "sample".into(),
            title: "Sample".into(),
            difficulty: 1,
            description: "prints two lines".into(),
            program: "a = 1\nb = 2\nprint(a)\nprint(b)\nprint(a + b)\nprint(b - a)\nprint(a * b)\n".into(),
            language_tag: "python".into(),
            test_cases: vec![TestCase {
                inputs: vec![],
                expected_output: "1\n".into(),
                exposes_error: true,
            }],
            error_spec: ErrorSpec {
                single_line: true,
                line_numbers: vec![3],
                nature: "wrong variable".into(),
            },
            hints: vec!["first".into(), "second".into()],
            modify_prompt: None,
            syntax_error_flag: false,
        }
    }

    #[test]
    fn sample_is_valid() {
        assert!(validate_challenge(&sample()).is_empty());
    }

    #[test]
    fn out_of_range_line_is_one_violation() {
        let mut c = sample();
        c.error_spec.line_numbers = vec![99];
        let report = validate_challenge(&c);
        assert_eq!(
            report.violations,
            vec![Violation::LineOutOfRange {
                line: 99,
                line_count: 7
            }]
        );
    }

    #[test]
    fn line_zero_is_out_of_range() {
        let mut c = sample();
        c.error_spec.line_numbers = vec![0];
        assert_eq!(validate_challenge(&c).violations.len(), 1);
    }

    #[test]
    fn no_exposing_case_is_one_violation() {
        let mut c = sample();
        c.test_cases[0].exposes_error = false;
        assert_eq!(
            validate_challenge(&c).violations,
            vec![Violation::NoExposingTestCase]
        );
    }

    #[test]
    fn empty_test_cases_are_legal() {
        let mut c = sample();
        c.test_cases.clear();
        assert!(validate_challenge(&c).is_empty());
    }

    #[test]
    fn single_line_with_two_lines_is_invariant_error() {
        let mut c = sample();
        c.error_spec.line_numbers = vec![3, 4];
        let text = serde_json::to_string(&c).unwrap();
        match parse_challenge(&text) {
            Err(ChallengeError::Invariant(v)) => {
                assert_eq!(v, vec![Violation::SingleLineArity(2)])
            }
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn difficulty_outside_range() {
        let mut c = sample();
        c.difficulty = 4;
        assert_eq!(
            validate_challenge(&c).violations,
            vec![Violation::DifficultyOutOfRange(4)]
        );
    }

    #[test]
    fn unknown_key_is_schema_error() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v["solution"] = serde_json::json!("x");
        let err = parse_challenge(&v.to_string()).unwrap_err();
        assert!(matches!(err, ChallengeError::Schema(_)), "{err:?}");
    }

    #[test]
    fn missing_key_is_schema_error() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v.as_object_mut().unwrap().remove("hints");
        assert!(matches!(
            parse_challenge(&v.to_string()),
            Err(ChallengeError::Schema(_))
        ));
    }

    #[test]
    fn truncated_document_is_parse_error() {
        assert!(matches!(
            parse_challenge("{\"id\": \"x\""),
            Err(ChallengeError::Parse(_))
        ));
    }

    #[test]
    fn hints_clamp_and_fall_back() {
        let mut c = sample();
        assert_eq!(c.hint_at(0), "first");
        assert_eq!(c.hint_at(7), "second");
        c.hints.clear();
        assert_eq!(c.hint_at(3), crate::prompts::FALLBACK_HINT);
    }
}
