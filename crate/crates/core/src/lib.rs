//! PRIMMDebug core: the challenge model, the nine-stage debugging process,
//! a sandboxed program runner, the event log and the analytics built on it.

pub mod analytics;
pub mod challenge;
pub mod config;
pub mod error;
pub mod prompts;
pub mod replay;
pub mod runner;
pub mod session_log;
pub mod sim;
pub mod stage;

pub use challenge::{list_challenges, load_challenge, parse_challenge, validate_challenge, Challenge, Corpus, ErrorSpec, TestCase};
pub use config::Config;
pub use error::{AnalyticsError, ChallengeError, LogError, RunnerError, StatsError, TransitionError};
pub use runner::{RunRequest, RunResult, Runner, RunnerConfig};
pub use session_log::{EventKind, RunSnapshot, SessionEvent, SessionSummary};
pub use stage::{advance, policy, SessionState, Stage, StagePolicy, Transition, TransitionEvent};
