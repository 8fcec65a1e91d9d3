//! Runs challenge programs in a separate interpreter process and checks them
//! against test cases.
//!
//! Every run gets a fresh temporary working directory and a stripped-down
//! environment. The child is killed when the timeout expires. Program
//! failures (tracebacks, non-zero exits, timeouts) are reported in the
//! [`RunResult`]; only failing to start the interpreter is an error.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::challenge::{Challenge, TestCase};
use crate::error::RunnerError;
use crate::session_log::RunSnapshot;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const INTERPRETER_ENV: &str = "PRIMMDEBUG_INTERPRETER";
/// Placeholder replaced by the program path in the interpreter command.
pub const FILE_PLACEHOLDER: &str = "{file}";
/// Captured output beyond this many bytes per stream is dropped.
pub const OUTPUT_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Interpreter command and arguments. `{file}` is replaced by the
    /// program path; without it the path is appended.
    pub interpreter: Vec<String>,
    pub program_file_name: String,
    /// Where per-run temp directories are created. System default if unset.
    pub temp_root: Option<PathBuf>,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            interpreter: vec!["python3".into()],
            program_file_name: "main.py".into(),
            temp_root: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl RunnerConfig {
    /// Splits a command line on whitespace, e.g. `python3 -I {file}`.
    pub fn with_command_line(mut self, line: &str) -> Self {
        self.interpreter = line.split_whitespace().map(String::from).collect();
        self
    }

    /// Default config, with the interpreter taken from
    /// `PRIMMDEBUG_INTERPRETER` when set.
    pub fn from_env() -> Self {
        match std::env::var(INTERPRETER_ENV) {
            Ok(line) if !line.trim().is_empty() => Self::default().with_command_line(&line),
            _ => Self::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub program: String,
    pub stdin_lines: Vec<String>,
    /// Overrides the runner's default timeout.
    pub timeout: Option<Duration>,
}

impl RunRequest {
    pub fn new(program: impl Into<String>, stdin_lines: Vec<String>) -> Self {
        RunRequest {
            program: program.into(),
            stdin_lines,
            timeout: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    NonzeroExit,
    Timeout,
    SpawnFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub stdout: String,
    pub stderr: String,
    /// Interpreter diagnostic, or a timeout notice.
    pub error_message: Option<String>,
    pub exit_status: ExitStatus,
    pub exit_code: Option<i32>,
    /// Wall-clock seconds.
    pub duration: f64,
}

impl RunResult {
    pub fn snapshot(&self, req: &RunRequest) -> RunSnapshot {
        RunSnapshot {
            program: req.program.clone(),
            stdin: req.stdin_lines.clone(),
            stdout: self.stdout.clone(),
            stderr: self.stderr.clone(),
            error_message: self.error_message.clone(),
        }
    }
}

/// Strips trailing whitespace from every line and trailing newlines from the
/// whole text. Output comparison is exact after this.
pub fn normalize(s: &str) -> String {
    let lines: Vec<&str> = s.split('\n').map(str::trim_end).collect();
    lines.join("\n").trim_end_matches('\n').to_string()
}

pub fn outputs_match(actual: &str, expected: &str) -> bool {
    normalize(actual) == normalize(expected)
}

#[derive(Debug, Clone, Default)]
pub struct Runner {
    config: RunnerConfig,
}

fn read_capped(mut r: impl Read) -> Vec<u8> {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = OUTPUT_LIMIT.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    kept
}

impl Runner {
    pub fn new(config: RunnerConfig) -> Self {
        Runner { config }
    }

    pub fn config(&self) -> &RunnerConfig {
        &self.config
    }

    pub fn run(&self, req: &RunRequest) -> Result<RunResult, RunnerError> {
        let timeout = req.timeout.unwrap_or(self.config.timeout);
        if timeout.is_zero() {
            return Err(RunnerError::ZeroTimeout);
        }
        if req.program.trim().is_empty() {
            return Err(RunnerError::EmptyProgram);
        }
        let (exe, args) = self
            .config
            .interpreter
            .split_first()
            .ok_or(RunnerError::EmptyCommand)?;
        let spawn_failure = |message: String| RunnerError::SpawnFailure {
            command: self.config.interpreter.join(" "),
            message,
        };

        let mut builder = tempfile::Builder::new();
        builder.prefix("primmdebug-run-");
        let workdir = match &self.config.temp_root {
            Some(root) => builder.tempdir_in(root),
            None => builder.tempdir(),
        }
        .map_err(|e| spawn_failure(format!("temp dir: {e}")))?;
        let file = workdir.path().join(&self.config.program_file_name);
        std::fs::write(&file, &req.program).map_err(|e| spawn_failure(format!("writing program: {e}")))?;
        // Relative to the working directory, so tracebacks do not leak the
        // random temp path and stay identical between runs.
        let file_arg = self.config.program_file_name.clone();

        let mut argv: Vec<String> = args
            .iter()
            .map(|a| a.replace(FILE_PLACEHOLDER, &file_arg))
            .collect();
        if !args.iter().any(|a| a.contains(FILE_PLACEHOLDER)) {
            argv.push(file_arg);
        }

        let mut cmd = Command::new(exe);
        cmd.args(&argv)
            .current_dir(workdir.path())
            .env_clear()
            .env("HOME", workdir.path())
            .env("TMPDIR", workdir.path())
            .env("LANG", "C.UTF-8")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONUNBUFFERED", "1")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| spawn_failure(e.to_string()))?;

        let mut input = req.stdin_lines.join("\n");
        if !req.stdin_lines.is_empty() {
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("stdin piped");
        let feeder = thread::spawn(move || {
            // A program that stops reading early closes the pipe; that is fine.
            let _ = stdin.write_all(input.as_bytes());
        });
        let out = child.stdout.take().expect("stdout piped");
        let err = child.stderr.take().expect("stderr piped");
        let out_reader = thread::spawn(move || read_capped(out));
        let err_reader = thread::spawn(move || read_capped(err));

        let waited = child
            .wait_timeout(timeout)
            .map_err(|e| spawn_failure(e.to_string()))?;
        let status = match waited {
            Some(status) => Some(status),
            None => {
                let _ = child.kill();
                let _ = child.wait();
                None
            }
        };
        let duration = started.elapsed().as_secs_f64();
        let _ = feeder.join();
        let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
        let mut stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
        // Interpreters report the script by absolute path; drop the random
        // temp prefix so diagnostics are identical between runs.
        for dir in [Some(workdir.path().to_path_buf()), workdir.path().canonicalize().ok()]
            .into_iter()
            .flatten()
        {
            let prefix = format!("{}{}", dir.display(), std::path::MAIN_SEPARATOR);
            stderr = stderr.replace(&prefix, "");
        }

        let (exit_status, exit_code, error_message) = match status {
            None => (
                ExitStatus::Timeout,
                None,
                Some(format!(
                    "The program did not finish within {} seconds and was stopped.",
                    timeout.as_secs_f64()
                )),
            ),
            Some(s) if s.success() => (ExitStatus::Ok, s.code(), None),
            Some(s) => {
                let msg = match stderr.trim() {
                    "" => match s.code() {
                        Some(code) => format!("The program exited with status {code}."),
                        None => "The program was terminated by a signal.".to_string(),
                    },
                    trace => trace.to_string(),
                };
                (ExitStatus::NonzeroExit, s.code(), Some(msg))
            }
        };

        Ok(RunResult {
            stdout,
            stderr,
            error_message,
            exit_status,
            exit_code,
            duration,
        })
    }

    /// Runs `program` once per test case, in parallel, and compares
    /// normalized outputs.
    pub fn evaluate_harness(&self, program: &str, cases: &[TestCase]) -> Result<HarnessResult, RunnerError> {
        if cases.is_empty() {
            return Err(RunnerError::NoTestCases);
        }
        let results: Vec<Result<CaseResult, RunnerError>> = thread::scope(|scope| {
            let handles: Vec<_> = cases
                .iter()
                .map(|case| {
                    scope.spawn(move || {
                        let req = RunRequest::new(program, case.inputs.clone());
                        let res = self.run(&req)?;
                        Ok(CaseResult {
                            inputs: case.inputs.clone(),
                            expected_output: case.expected_output.clone(),
                            passed: outputs_match(&res.stdout, &case.expected_output),
                            actual_output: res.stdout,
                            error_message: res.error_message,
                            exit_status: res.exit_status,
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("harness worker panicked"))
                .collect()
        });
        let per_case = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(HarnessResult {
            all_passed: per_case.iter().all(|c| c.passed),
            per_case,
        })
    }

    /// Checks that the buggy program really fails at least one case and that
    /// the `exposes_error` annotations agree with what happens.
    pub fn verify_exposure(&self, challenge: &Challenge) -> Result<ExposureReport, RunnerError> {
        if challenge.test_cases.is_empty() {
            return Ok(ExposureReport {
                challenge_id: challenge.id.clone(),
                cases: Vec::new(),
                ok: true,
            });
        }
        let harness = self.evaluate_harness(&challenge.program, &challenge.test_cases)?;
        let cases: Vec<CaseExposure> = challenge
            .test_cases
            .iter()
            .zip(&harness.per_case)
            .enumerate()
            .map(|(index, (case, result))| CaseExposure {
                index,
                annotated: case.exposes_error,
                observed: !result.passed,
            })
            .collect();
        let ok = cases.iter().any(|c| c.observed) && cases.iter().all(CaseExposure::consistent);
        Ok(ExposureReport {
            challenge_id: challenge.id.clone(),
            cases,
            ok,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub inputs: Vec<String>,
    pub expected_output: String,
    pub actual_output: String,
    pub passed: bool,
    pub error_message: Option<String>,
    pub exit_status: ExitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessResult {
    pub per_case: Vec<CaseResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CaseExposure {
    pub index: usize,
    pub annotated: bool,
    pub observed: bool,
}

impl CaseExposure {
    pub fn consistent(&self) -> bool {
        self.annotated == self.observed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExposureReport {
    pub challenge_id: String,
    pub cases: Vec<CaseExposure>,
    /// At least one case fails and every annotation matches. Vacuously true
    /// for challenges without test cases.
    pub ok: bool,
}

impl ExposureReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &CaseExposure> {
        self.cases.iter().filter(|c| !c.consistent())
    }
}
