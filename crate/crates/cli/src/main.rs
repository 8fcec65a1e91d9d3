use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use primmdebug_core::analytics::{analyze_dir, read_survey_csv, write_outputs, OutputFormat, SurveyScale};
use primmdebug_core::runner::ExitStatus;
use primmdebug_core::session_log::JsonlStore;
use primmdebug_core::sim::{load_solutions, simulate_cohort, CohortConfig};
use primmdebug_core::{list_challenges, load_challenge, Config, Corpus, RunRequest, Runner};

#[derive(Parser)]
#[command(name = "primmdebug", version, about = "PRIMMDebug debugging-practice service and tools")]
struct Cli {
    /// TOML config file; PRIMMDEBUG_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        challenges: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Log sessions that carry a participant id.
        #[arg(long)]
        research: bool,
    },
    /// Compute stage times, outcomes and (with a survey) correlations from a
    /// directory of session logs.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        challenges: PathBuf,
        #[arg(long)]
        survey: Option<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: OutputFormat,
    },
    /// List the challenges in a directory.
    List {
        #[arg(long)]
        challenges: Option<PathBuf>,
    },
    /// Check challenge files against the schema and invariants.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run each challenge's test cases and check the exposure annotations,
    /// and that reference fixes (if present) pass.
    Verify {
        #[arg(long)]
        challenges: Option<PathBuf>,
        /// Directory of `<id>.py` reference fixes. Defaults to
        /// `<challenges>/solutions` when it exists.
        #[arg(long)]
        solutions: Option<PathBuf>,
    },
    /// Run a program file the way the service does.
    Run {
        file: PathBuf,
        /// One stdin line; repeat for more.
        #[arg(long = "input", short = 'i')]
        inputs: Vec<String>,
        /// Seconds.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Generate a seeded synthetic cohort of session logs and a survey.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        challenges: Option<PathBuf>,
        #[arg(long)]
        solutions: Option<PathBuf>,
        #[arg(long, default_value_t = CohortConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = CohortConfig::default().participants)]
        participants: usize,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn solutions_dir(explicit: Option<PathBuf>, challenges: &Path) -> Option<PathBuf> {
    explicit.or_else(|| Some(challenges.join("solutions")).filter(|p| p.is_dir()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve {
            port,
            bind,
            challenges,
            data,
            research,
        } => {
            cfg.port = port.unwrap_or(cfg.port);
            cfg.bind = bind.unwrap_or(cfg.bind);
            cfg.challenge_dir = challenges.unwrap_or(cfg.challenge_dir);
            cfg.data_dir = data.unwrap_or(cfg.data_dir);
            cfg.research_mode |= research;
            tokio::runtime::Runtime::new()?.block_on(primmdebug_server::serve(&cfg))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze {
            data,
            challenges,
            survey,
            out,
            format,
        } => {
            let corpus = Corpus::load(&challenges)?;
            let runner = Runner::new(cfg.runner_config()?);
            let survey = survey
                .map(|p| read_survey_csv(&p, SurveyScale::default()))
                .transpose()?;
            let analysis = analyze_dir(&data, &corpus, &runner, survey.as_ref())?;
            for path in write_outputs(&analysis, &out, format)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List { challenges } => {
            let index = list_challenges(challenges.unwrap_or(cfg.challenge_dir))?;
            for w in &index.warnings {
                eprintln!("warning: {}: {}", w.path.display(), w.message);
            }
            for e in &index.entries {
                println!("{}\t{}\t{}", e.difficulty, e.id, e.title);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { files } => {
            let mut failed = false;
            for f in files {
                match load_challenge(&f) {
                    Ok(c) => println!("ok\t{}\t{}", f.display(), c.id),
                    Err(e) => {
                        failed = true;
                        println!("FAIL\t{}\t{e}", f.display());
                    }
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Verify { challenges, solutions } => {
            let dir = challenges.unwrap_or(cfg.challenge_dir.clone());
            let corpus = Corpus::load(&dir)?;
            let runner = Runner::new(cfg.runner_config()?);
            let fixes = solutions_dir(solutions, &dir).map(|d| load_solutions(&d)).transpose()?;
            let mut failed = !corpus.warnings.is_empty();
            for w in &corpus.warnings {
                println!("FAIL\t{}\t{}", w.path.display(), w.message);
            }
            for c in corpus.iter() {
                let report = runner.verify_exposure(c)?;
                let mut problems: Vec<String> = report
                    .mismatches()
                    .map(|m| format!("case {} annotated exposes_error={} but observed {}", m.index, m.annotated, m.observed))
                    .collect();
                if !c.test_cases.is_empty() && !report.cases.iter().any(|m| m.observed) {
                    problems.push("buggy program passes every case".into());
                }
                if let Some(fix) = fixes.as_ref().and_then(|f| f.get(&c.id)) {
                    if !c.test_cases.is_empty() && !runner.evaluate_harness(fix, &c.test_cases)?.all_passed {
                        problems.push("reference fix fails the harness".into());
                    }
                }
                if problems.is_empty() {
                    println!("ok\t{}", c.id);
                } else {
                    failed = true;
                    println!("FAIL\t{}\t{}", c.id, problems.join("; "));
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Run { file, inputs, timeout } => {
            let program = std::fs::read_to_string(&file)?;
            let mut req = RunRequest::new(program, inputs);
            if let Some(t) = timeout {
                req = req.with_timeout(Duration::try_from_secs_f64(t)?);
            }
            let result = Runner::new(cfg.runner_config()?).run(&req)?;
            print!("{}", result.stdout);
            eprint!("{}", result.stderr);
            Ok(match result.exit_status {
                ExitStatus::Ok => ExitCode::SUCCESS,
                ExitStatus::Timeout => {
                    eprintln!("{}", result.error_message.unwrap_or_default());
                    ExitCode::from(124)
                }
                _ => ExitCode::FAILURE,
            })
        }
        Command::Simulate {
            out,
            challenges,
            solutions,
            seed,
            participants,
        } => {
            let dir = challenges.unwrap_or(cfg.challenge_dir.clone());
            let corpus = Corpus::load(&dir)?;
            let fixes = match solutions_dir(solutions, &dir) {
                Some(d) => load_solutions(&d)?,
                None => Default::default(),
            };
            let runner = Runner::new(cfg.runner_config()?);
            let cohort_cfg = CohortConfig {
                seed,
                participants,
                ..CohortConfig::default()
            };
            let cohort = simulate_cohort(&corpus, &fixes, &runner, &cohort_cfg)?;
            let logs = out.join("logs");
            std::fs::create_dir_all(&logs)?;
            if std::fs::read_dir(&logs)?.next().is_some() {
                return Err(format!("{} is not empty", logs.display()).into());
            }
            cohort.write_to(&mut JsonlStore::new(&logs).without_sync())?;
            std::fs::write(out.join("survey.csv"), cohort.survey.to_csv()?)?;
            println!(
                "{} sessions from {} participants written to {}",
                cohort.sessions.len(),
                cohort.survey.responses.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
