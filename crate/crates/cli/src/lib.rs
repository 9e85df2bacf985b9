//! Command-line front end: each subcommand maps onto one session operation.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | internal or I/O failure |
//! | 2 | invalid input or usage |
//! | 3 | operation not allowed in the session's phase |
//! | 4 | plan generation or refinement failed after retries |
//! | 5 | backend failure (transport, refusal, replay miss) |
//! | 6 | storage failure |
//! | 7 | unknown session or plan |

pub mod render;

use std::fs;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use reliefplan_core::gateway::live::OpenAiBackend;
use reliefplan_core::gateway::replay::{ReplayBackend, ReplayMode, ReplayStore};
use reliefplan_core::{
    BackendDescriptor, BackendKind, BoardTarget, ChatBackend, EngineConfig, ErrorClass, FinalPlanRecord,
    GenerationView, KnowledgeBase, RevisionView, Scenario, ServiceError, SessionEngine,
    SessionId, SessionService, SessionStore, board_view, serialize_plan,
};

#[derive(Debug, Parser)]
#[command(name = "reliefplan", version, about = "Generate and refine disaster-response plans of action")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReplayFlag {
    /// Call the live backend directly.
    Off,
    /// Call the live backend and store every reply.
    Record,
    /// Serve stored replies only; unknown requests fail.
    Replay,
    /// Serve stored replies; record misses from the live backend.
    Passthrough,
}

#[derive(Debug, Clone, Args)]
pub struct CliConfig {
    /// Root of an OpenAI-compatible chat completions API.
    #[arg(long, global = true, default_value = "https://api.openai.com/v1")]
    pub backend_url: String,
    #[arg(long, global = true, default_value = "gpt-4")]
    pub model: String,
    /// Backend context window in tokens.
    #[arg(long, global = true, default_value_t = 8192, value_parser = clap::value_parser!(u32).range(1..))]
    pub context_limit: u32,
    /// Tokens reserved for the reply within the context window.
    #[arg(long, global = true, default_value_t = 1024)]
    pub reserved_for_reply: u32,
    /// Directory of guideline documents; the built-in knowledge base otherwise.
    #[arg(long, global = true)]
    pub kb_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".reliefplan")]
    pub store_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "off")]
    pub replay: ReplayFlag,
    /// Replay corpus directory; defaults to `<store-dir>/replay`.
    #[arg(long, global = true)]
    pub replay_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<i64>,
    /// Session to operate on; defaults to the most recently used one.
    #[arg(long, global = true)]
    pub session: Option<String>,
    /// Print JSON documents instead of text.
    #[arg(long, global = true)]
    pub structured: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a new session and make it current.
    New,
    /// Submit a scenario file (JSON).
    Scenario { file: PathBuf },
    /// Generate three candidate plans.
    Generate,
    /// Select a candidate plan (1-3).
    Select { ordinal: u8 },
    /// Ask for a revision of the selected plan.
    Refine {
        #[arg(required = true, num_args = 1..)]
        feedback: Vec<String>,
    },
    /// Finalize the current revision.
    Finalize,
    /// Show the session state.
    Show,
    /// Show the asset-by-task allocation board.
    Board {
        /// Revision index; 0 is the plan as selected.
        #[arg(long, conflicts_with = "candidate")]
        version: Option<usize>,
        #[arg(long)]
        candidate: Option<u8>,
    },
    /// Print the session transcript.
    Export,
    /// Run the whole loop for a scenario in one invocation.
    Run {
        scenario: PathBuf,
        /// JSON file `{"select": n, "refinements": ["..."]}`.
        #[arg(long, conflicts_with = "interactive")]
        script: Option<PathBuf>,
        /// Read the selection and feedback from standard input.
        #[arg(long)]
        interactive: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Require `Authorization: Bearer <token>` on every request.
        #[arg(long, env = "RELIEFPLAN_API_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunScript {
    pub select: u8,
    #[serde(default)]
    pub refinements: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Usage(String),
    #[error("no current session; run `reliefplan new` or pass --session")]
    NoSession,
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Service(e) => match e.class() {
                ErrorClass::InvalidInput => 2,
                ErrorClass::Conflict => 3,
                ErrorClass::Unprocessable => 4,
                ErrorClass::Backend => 5,
                ErrorClass::Storage => 6,
                ErrorClass::NotFound => 7,
                ErrorClass::Internal => 1,
            },
            CliError::Usage(_) | CliError::File { .. } | CliError::Setup(_) => 2,
            CliError::NoSession => 7,
            CliError::Io(_) => 1,
        }
    }

    /// Stable token naming the failure.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Service(e) => e.code(),
            CliError::Usage(_) => "Usage",
            CliError::NoSession => "NoSession",
            CliError::File { .. } => "File",
            CliError::Setup(_) => "Setup",
            CliError::Io(_) => "Io",
        }
    }
}

impl CliConfig {
    pub fn replay_dir(&self) -> PathBuf {
        self.replay_dir.clone().unwrap_or_else(|| self.store_dir.join("replay"))
    }

    fn backend(&self) -> Result<Arc<dyn ChatBackend>, CliError> {
        let setup = |e: reliefplan_core::GatewayError| CliError::Setup(e.to_string());
        let descriptor = BackendDescriptor::new(&self.model, self.context_limit, BackendKind::Live);
        let live = || -> Result<Arc<dyn ChatBackend>, CliError> {
            Ok(Arc::new(OpenAiBackend::from_env(descriptor.clone(), &self.backend_url).map_err(setup)?))
        };
        let mode = match self.replay {
            ReplayFlag::Off => return live(),
            ReplayFlag::Record => ReplayMode::Record,
            ReplayFlag::Replay => ReplayMode::Replay,
            ReplayFlag::Passthrough => ReplayMode::Passthrough,
        };
        let store = Arc::new(ReplayStore::open(self.replay_dir(), mode).map_err(setup)?);
        let inner = match mode {
            ReplayMode::Replay => None,
            _ => Some(live()?),
        };
        Ok(Arc::new(ReplayBackend::new(descriptor, store, inner)))
    }

    /// Builds the engine and store. `SOURCE_DATE_EPOCH`, when set, pins every
    /// timestamp so replayed runs are byte-reproducible.
    pub fn service(&self) -> Result<SessionService, CliError> {
        let kb = match &self.kb_dir {
            Some(dir) => KnowledgeBase::load_dir(dir).map_err(|e| CliError::Setup(e.to_string()))?,
            None => KnowledgeBase::builtin(),
        };
        let config = EngineConfig {
            model_id: self.model.clone(),
            reserved_for_reply: self.reserved_for_reply,
            seed: self.seed,
            ..EngineConfig::default()
        };
        let mut engine =
            SessionEngine::new(self.backend()?, &kb, config).map_err(|e| CliError::Setup(e.to_string()))?;
        if let Some(at) = fixed_time()? {
            engine = engine.with_clock(Arc::new(move || at));
        }
        let store = SessionStore::open(&self.store_dir).map_err(ServiceError::from)?;
        let mut service = SessionService::new(engine, store);
        if self.replay != ReplayFlag::Off {
            service = service.with_replay_ref(self.replay_dir().display().to_string());
        }
        Ok(service)
    }
}

fn fixed_time() -> Result<Option<DateTime<Utc>>, CliError> {
    let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") else {
        return Ok(None);
    };
    raw.trim()
        .parse::<i64>()
        .ok()
        .and_then(|secs| DateTime::from_timestamp(secs, 0))
        .map(Some)
        .ok_or_else(|| CliError::Setup(format!("SOURCE_DATE_EPOCH `{raw}` is not a Unix timestamp")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::File {
        path: path.to_owned(),
        source: io::Error::new(io::ErrorKind::InvalidData, e),
    })
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CreatedDoc<'a> {
    session_id: &'a SessionId,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct TranscriptDoc<'a> {
    session_id: &'a SessionId,
    transcript: &'a str,
}

/// Structured output of `run`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunDoc {
    pub session_id: SessionId,
    pub candidates: GenerationView,
    pub revisions: Vec<RevisionView>,
    pub finalized: FinalPlanRecord,
    pub board: reliefplan_core::BoardView,
}

/// Where command output goes.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    /// Phase prompts in interactive mode.
    pub prompt: &'a mut dyn Write,
    pub input: &'a mut dyn BufRead,
}

struct Runner<'a, 'b> {
    config: &'a CliConfig,
    io: &'a mut Io<'b>,
}

impl Runner<'_, '_> {
    fn text(&mut self, text: &str) -> Result<(), CliError> {
        self.io.out.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            self.io.out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn json(&mut self, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::from)?;
        self.text(&text)
    }

    fn emit<T: Serialize>(&mut self, value: &T, text: impl FnOnce(&T) -> String) -> Result<(), CliError> {
        if self.config.structured {
            self.json(value)
        } else {
            self.text(&text(value))
        }
    }

    fn session_id(&self, service: &SessionService) -> Result<SessionId, CliError> {
        match &self.config.session {
            Some(id) => Ok(SessionId::new(id.clone())),
            None => service
                .store()
                .current()
                .map_err(ServiceError::from)?
                .ok_or(CliError::NoSession),
        }
    }

    fn ask(&mut self, prompt: &str) -> Result<Option<String>, CliError> {
        write!(self.io.prompt, "{prompt}")?;
        self.io.prompt.flush()?;
        let mut line = String::new();
        if self.io.input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim().to_owned()))
    }

    fn execute(&mut self, command: &Command) -> Result<(), CliError> {
        if let Command::Serve { addr, token } = command {
            let service = Arc::new(self.config.service()?);
            writeln!(self.io.prompt, "listening on http://{addr}")?;
            return Ok(reliefplan_server::serve_blocking(service, *addr, token.clone())?);
        }
        let service = self.config.service()?;
        match command {
            Command::New => {
                let session = service.create()?;
                self.emit(&CreatedDoc { session_id: &session.id }, |d| d.session_id.to_string())
            }
            Command::Scenario { file } => {
                let scenario: Scenario = read_json(file)?;
                let id = self.session_id(&service)?;
                let session = service.submit_scenario(&id, scenario)?;
                self.emit(&session, |s| {
                    format!("Scenario captured for {}; phase {}.", s.id, s.phase)
                })
            }
            Command::Generate => {
                let id = self.session_id(&service)?;
                let session = service.generate(&id)?;
                let view = GenerationView::of(&session).expect("generated session has candidates");
                self.emit(&view, |v| render::plan_set(&v.plan_set, &v.issues))
            }
            Command::Select { ordinal } => {
                let id = self.session_id(&service)?;
                let session = service.select(&id, *ordinal)?;
                self.emit(&session, |s| {
                    serialize_plan(s.current_plan().expect("selected session has a plan"))
                })
            }
            Command::Refine { feedback } => {
                let id = self.session_id(&service)?;
                let session = service.refine(&id, &feedback.join(" "))?;
                self.emit(&RevisionView::of(&session).expect("refined"), |v| {
                    format!("{}\n{}", serialize_plan(&v.plan), render::issues(&v.issues))
                })
            }
            Command::Finalize => {
                let id = self.session_id(&service)?;
                let record = service.finalize(&id)?;
                let session = service.get(&id)?;
                let board = board_view(&session, BoardTarget::Latest)?;
                self.emit(&record, |r| {
                    format!("{}\n{}", serialize_plan(&r.final_plan), render::board(&board))
                })
            }
            Command::Show => {
                let id = self.session_id(&service)?;
                let session = service.get(&id)?;
                self.emit(&session, render::session)
            }
            Command::Board { version, candidate } => {
                let id = self.session_id(&service)?;
                let target = match (version, candidate) {
                    (Some(v), _) => BoardTarget::Version(*v),
                    (None, Some(n)) => BoardTarget::Candidate(*n),
                    (None, None) => BoardTarget::Latest,
                };
                let view = service.board(&id, target)?;
                self.emit(&view, render::board)
            }
            Command::Export => {
                let id = self.session_id(&service)?;
                let transcript = service.transcript(&id)?;
                if self.config.structured {
                    self.json(&TranscriptDoc {
                        session_id: &id,
                        transcript: &transcript,
                    })
                } else {
                    self.io.out.write_all(transcript.as_bytes())?;
                    Ok(())
                }
            }
            Command::Run {
                scenario,
                script,
                interactive,
            } => self.run(&service, scenario, script.as_deref(), *interactive),
            Command::Serve { .. } => unreachable!("handled above"),
        }
    }

    fn run(
        &mut self,
        service: &SessionService,
        scenario: &Path,
        script: Option<&Path>,
        interactive: bool,
    ) -> Result<(), CliError> {
        let scenario: Scenario = read_json(scenario)?;
        let script: Option<RunScript> = script.map(read_json).transpose()?;
        let structured = self.config.structured;

        let id = service.create()?.id;
        service.submit_scenario(&id, scenario)?;
        let session = service.generate(&id)?;
        let candidates = GenerationView::of(&session).expect("generated session has candidates");
        if !structured {
            self.text(&format!("Session: {id}\n"))?;
            self.text(&render::plan_set(&candidates.plan_set, &candidates.issues))?;
        }

        let ordinal = match (&script, interactive) {
            (Some(script), _) => script.select,
            (None, true) => {
                let prompt = format!("[{}] select a plan (1-3): ", session.phase);
                let answer = self.ask(&prompt)?.ok_or_else(|| CliError::Usage("no plan selected".into()))?;
                answer
                    .parse()
                    .map_err(|_| CliError::Usage(format!("`{answer}` is not a plan number")))?
            }
            (None, false) => {
                return Err(CliError::Usage(
                    "no plan selection: pass --script <file> or --interactive".into(),
                ));
            }
        };
        let mut session = service.select(&id, ordinal)?;
        if !structured {
            self.text(&format!("Selected Plan of Action {ordinal}.\n"))?;
        }

        let mut scripted = script.map(|s| s.refinements.into_iter());
        let mut revisions = Vec::new();
        loop {
            let feedback = match &mut scripted {
                Some(steps) => steps.next(),
                None => {
                    let prompt = format!("[{}] feedback (blank line to finalize): ", session.phase);
                    self.ask(&prompt)?.filter(|f| !f.is_empty())
                }
            };
            let Some(feedback) = feedback else { break };
            session = service.refine(&id, &feedback)?;
            let view = RevisionView::of(&session).expect("refined session has revisions");
            if !structured {
                let board = board_view(&session, BoardTarget::Latest)?;
                self.text(&format!(
                    "Revision {}:\n{}\n{}{}",
                    view.revision,
                    serialize_plan(&view.plan),
                    render::issues(&view.issues),
                    render::diff(board.diff.as_deref().unwrap_or(&[]), view.revision as usize - 1)
                ))?;
            }
            revisions.push(view);
        }

        let finalized = service.finalize(&id)?;
        let session = service.get(&id)?;
        let board = board_view(&session, BoardTarget::Latest)?;
        if structured {
            self.json(&RunDoc {
                session_id: id,
                candidates,
                revisions,
                finalized,
                board,
            })
        } else {
            self.text(&format!(
                "Final plan:\n{}\n{}",
                serialize_plan(&finalized.final_plan),
                render::board(&board)
            ))
        }
    }
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli, io: &mut Io<'_>) -> Result<(), CliError> {
    Runner {
        config: &cli.config,
        io,
    }
    .execute(&cli.command)
}
