//! Service and runner settings: a TOML file, then `PRIMMDEBUG_*` environment
//! overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::RunnerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub challenge_dir: PathBuf,
    pub data_dir: PathBuf,
    /// Interpreter command line; `{file}` marks the program path.
    pub interpreter: String,
    pub timeout_secs: f64,
    pub temp_root: Option<PathBuf>,
    /// Log sessions that carry a participant id.
    pub research_mode: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: "127.0.0.1".into(),
            port: 8080,
            challenge_dir: "challenges".into(),
            data_dir: "data".into(),
            interpreter: "python3".into(),
            timeout_secs: 5.0,
            temp_root: None,
            research_mode: false,
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// File (if given) then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|name| std::env::var(name).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let bad = |name: &'static str, value: &str| ConfigError::Env {
            name,
            message: format!("cannot parse {value:?}"),
        };
        if let Some(v) = lookup("PRIMMDEBUG_BIND") {
            self.bind = v;
        }
        if let Some(v) = lookup("PRIMMDEBUG_PORT") {
            self.port = v.trim().parse().map_err(|_| bad("PRIMMDEBUG_PORT", &v))?;
        }
        if let Some(v) = lookup("PRIMMDEBUG_CHALLENGES") {
            self.challenge_dir = v.into();
        }
        if let Some(v) = lookup("PRIMMDEBUG_DATA") {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup(crate::runner::INTERPRETER_ENV) {
            self.interpreter = v;
        }
        if let Some(v) = lookup("PRIMMDEBUG_TIMEOUT") {
            self.timeout_secs = v.trim().parse().map_err(|_| bad("PRIMMDEBUG_TIMEOUT", &v))?;
        }
        if let Some(v) = lookup("PRIMMDEBUG_TEMP_ROOT") {
            self.temp_root = Some(v.into());
        }
        if let Some(v) = lookup("PRIMMDEBUG_RESEARCH") {
            self.research_mode = parse_bool(&v).ok_or_else(|| bad("PRIMMDEBUG_RESEARCH", &v))?;
        }
        Ok(())
    }

    pub fn runner_config(&self) -> Result<RunnerConfig, ConfigError> {
        let timeout = Duration::try_from_secs_f64(self.timeout_secs)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| ConfigError::Env {
                name: "PRIMMDEBUG_TIMEOUT",
                message: format!("timeout must be positive, got {}", self.timeout_secs),
            })?;
        Ok(RunnerConfig {
            timeout,
            temp_root: self.temp_root.clone(),
            ..RunnerConfig::default().with_command_line(&self.interpreter)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file_values() {
        let mut cfg: Config = toml::from_str("port = 9000\nresearch_mode = false\n").unwrap();
        assert_eq!(cfg.port, 9000);
        cfg.apply_env(|k| match k {
            "PRIMMDEBUG_PORT" => Some("9100".into()),
            "PRIMMDEBUG_RESEARCH" => Some("yes".into()),
            "PRIMMDEBUG_INTERPRETER" => Some("python3 -I {file}".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.port, 9100);
        assert!(cfg.research_mode);
        assert_eq!(cfg.runner_config().unwrap().interpreter, ["python3", "-I", "{file}"]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("colour = \"blue\"\n").is_err());
    }

    #[test]
    fn bad_env_value_is_error() {
        let mut cfg = Config::default();
        assert!(cfg
            .apply_env(|k| (k == "PRIMMDEBUG_PORT").then(|| "eighty".to_string()))
            .is_err());
    }
}
